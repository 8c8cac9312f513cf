use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use forestalg::algebra::{
    check_horizontal, is_distributive, validate_algebra, AlgebraError, FiniteForestAlgebra, LetterMap,
};
use forestalg::derived::build_derived_category;
use forestalg::fixtures;
use forestalg::format::{
    check_letter_map, parse_algebra, parse_gtable, parse_index_list, parse_letter_map,
    write_accept, write_algebra, write_letter_map, FORMATS,
};
use forestalg::forest::{paths, psi, Forest};
use forestalg::oracle::{run_suite, Bounds, SUITES};
use forestalg::pathlang::{pi_automaton, render_words, DEFAULT_ENGINE_CAP};
use forestalg::twodist::{is_2_distributive, TwoDistVerdict};
use forestalg::wreath::{wreath_generated, wreath_product, DEFAULT_WREATH_CAP};

const YES: u8 = 0;
const NO: u8 = 1;
const INCONCLUSIVE: u8 = 2;
const USAGE: u8 = 3;
const CAP: u8 = 4;

#[derive(Parser)]
#[command(name = "forestalg", version, about = "Finite forest algebras from the command line")]
struct Cli {
    /// Print the grammars of the file formats and exit.
    #[arg(long)]
    formats: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the forest algebra axioms.
    Validate { algebra: PathBuf },
    /// Decide a property of an algebra.
    Check {
        property: Property,
        algebra: PathBuf,
        /// Bound on the states of the path engine.
        #[arg(long, default_value_t = DEFAULT_ENGINE_CAP)]
        cap: usize,
    },
    /// Build a wreath product, or the fragment generated by letters.
    Wreath {
        left: PathBuf,
        right: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Right letter map and letter table; also writes the letter map
        /// next to the output.
        #[arg(long, num_args = 2, value_names = ["LETTERS", "GTABLE"])]
        generated: Option<Vec<PathBuf>>,
        #[arg(long, default_value_t = DEFAULT_WREATH_CAP)]
        cap: usize,
    },
    /// Build the derived category of two morphisms.
    Derived {
        left: PathBuf,
        left_letters: PathBuf,
        right: PathBuf,
        right_letters: PathBuf,
        #[arg(long)]
        check: Option<DerivedCheck>,
        #[arg(long)]
        summary: bool,
    },
    /// The word automaton of the path sets of a recognized language.
    Paths {
        algebra: PathBuf,
        letters: PathBuf,
        /// Accepting values, as `1,3`.
        #[arg(long)]
        accept: String,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Print the distributive normal form of a forest.
    Psi { forest: PathBuf },
    /// Print the path set of a forest, one word per line.
    Pi { forest: PathBuf },
    /// The built-in example algebras.
    Fixtures {
        #[command(subcommand)]
        action: FixtureAction,
    },
    /// Run a brute-force cross-check suite.
    Oracle {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_height: usize,
        #[arg(long, default_value_t = 6)]
        max_nodes: usize,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value_t = 1 << 20)]
        cap: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Horizontal,
    Distributive,
    #[value(name = "2-distributive")]
    TwoDistributive,
}

#[derive(Clone, Copy, ValueEnum)]
enum DerivedCheck {
    LocalDist,
}

#[derive(Subcommand)]
enum FixtureAction {
    List,
    /// Write NAME.fa, NAME.lm and NAME.accept into a directory.
    Emit {
        name: String,
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

type Outcome = Result<u8, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: USAGE, message: message.into() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_algebra(path: &Path) -> Result<FiniteForestAlgebra, Failure> {
    parse_algebra(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_letters(path: &Path, a: &FiniteForestAlgebra) -> Result<LetterMap, Failure> {
    let lm = parse_letter_map(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    check_letter_map(&lm, a).map_err(|e| usage(format!("{}: {}", path.display(), e.message)))?;
    Ok(lm)
}

fn load_forest(path: &Path) -> Result<Forest, Failure> {
    Forest::parse_any(read(path)?.trim()).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn algebra_failure(e: AlgebraError) -> Failure {
    let code = if matches!(e, AlgebraError::Cap { .. }) { CAP } else { USAGE };
    Failure { code, message: e.to_string() }
}

fn verdict(yes: bool) -> u8 {
    if yes {
        YES
    } else {
        NO
    }
}

fn run(cli: Cli) -> Outcome {
    if cli.formats {
        print!("{FORMATS}");
        return Ok(YES);
    }
    let Some(command) = cli.command else {
        return Err(usage("no subcommand given; see --help"));
    };
    match command {
        Command::Validate { algebra } => {
            let a = load_algebra(&algebra)?;
            let report = validate_algebra(&a);
            print!("{report}");
            Ok(verdict(report.is_valid()))
        }
        Command::Check { property, algebra, cap } => check(property, &load_algebra(&algebra)?, cap),
        Command::Wreath { left, right, output, generated, cap } => {
            let a1 = load_algebra(&left)?;
            let a2 = load_algebra(&right)?;
            let w = match generated {
                None => wreath_product(&a1, &a2, cap).map_err(algebra_failure)?,
                Some(files) => {
                    let lm = load_letters(&files[0], &a2)?;
                    let g = parse_gtable(&read(&files[1])?)
                        .map_err(|e| usage(format!("{}: {e}", files[1].display())))?;
                    let gw = wreath_generated(&a1, &a2, &lm, &g, cap).map_err(algebra_failure)?;
                    write(&output.with_extension("lm"), &write_letter_map(&gw.letters))?;
                    gw.wreath
                }
            };
            write(&output, &write_algebra(&w.algebra))?;
            println!("|H| = {}", w.algebra.h_size());
            println!("|V| = {}", w.algebra.v_size());
            Ok(YES)
        }
        Command::Derived { left, left_letters, right, right_letters, check, summary } => {
            let a1 = load_algebra(&left)?;
            let l1 = load_letters(&left_letters, &a1)?;
            let a2 = load_algebra(&right)?;
            let l2 = load_letters(&right_letters, &a2)?;
            let c = build_derived_category(&a1, &l1, &a2, &l2).map_err(|e| usage(e.to_string()))?;
            if summary {
                print!("{}", c.summary());
            } else {
                println!("objects {}", c.objects().len());
                println!("half-arrows {}", c.half_arrows().len());
                println!("arrows {}", c.arrows().len());
            }
            match check {
                None => Ok(YES),
                Some(DerivedCheck::LocalDist) => match c.local_distributivity_failure() {
                    None => {
                        println!("locally distributive: yes");
                        Ok(YES)
                    }
                    Some((id, x, y)) => {
                        println!("locally distributive: no");
                        println!("arrow {} on {x} and {y}", c.arrow_label(id));
                        Ok(NO)
                    }
                },
            }
        }
        Command::Paths { algebra, letters, accept, dot } => {
            let a = load_algebra(&algebra)?;
            let lm = load_letters(&letters, &a)?;
            let acc = parse_index_list(&accept).map_err(|e| usage(format!("--accept: {}", e.message)))?;
            if let Some(h) = acc.iter().find(|&&h| h >= a.h_size()) {
                return Err(usage(format!("--accept: {h} is not an element of H")));
            }
            let dfa = pi_automaton(&a, &lm, &acc);
            print!("{}", dfa.to_text());
            if let Some(path) = dot {
                write(&path, &dfa.to_dot())?;
            }
            Ok(YES)
        }
        Command::Psi { forest } => {
            println!("{}", psi(&load_forest(&forest)?));
            Ok(YES)
        }
        Command::Pi { forest } => {
            print!("{}", render_words(paths(&load_forest(&forest)?).words()));
            Ok(YES)
        }
        Command::Fixtures { action } => fixtures_command(action),
        Command::Oracle { suite, seed, max_height, max_nodes, budget, cap } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(usage(format!("unknown suite `{suite}`; suites are {}", SUITES.join(", "))));
            }
            let bounds = Bounds { seed, max_height, max_nodes, budget, cap };
            match run_suite(&suite, &bounds) {
                Ok(report) => {
                    print!("{report}");
                    Ok(verdict(report.passed()))
                }
                Err(e) if e.is_cap() => Err(Failure { code: CAP, message: e.to_string() }),
                Err(e) => Err(usage(e.to_string())),
            }
        }
    }
}

fn check(property: Property, a: &FiniteForestAlgebra, cap: usize) -> Outcome {
    match property {
        Property::Horizontal => match check_horizontal(a).failure() {
            None => {
                println!("yes");
                Ok(YES)
            }
            Some(fail) => {
                println!("no");
                println!("{fail}");
                Ok(NO)
            }
        },
        Property::Distributive => match is_distributive(a) {
            Ok(None) => {
                println!("yes");
                Ok(YES)
            }
            Ok(Some((v, h1, h2))) => {
                println!("no");
                println!("v={v} h1={h1} h2={h2}: v(h1+h2) != vh1+vh2");
                Ok(NO)
            }
            Err(AlgebraError::NotHorizontal(fail)) => {
                println!("no");
                println!("horizontal: {fail}");
                Ok(NO)
            }
            Err(e) => Err(algebra_failure(e)),
        },
        Property::TwoDistributive => {
            let v = is_2_distributive(a, cap);
            print!("{v}");
            Ok(match v {
                TwoDistVerdict::Yes { .. } => YES,
                TwoDistVerdict::No(_) => NO,
                TwoDistVerdict::Inconclusive { .. } => INCONCLUSIVE,
            })
        }
    }
}

fn fixtures_command(action: FixtureAction) -> Outcome {
    match action {
        FixtureAction::List => {
            for fx in fixtures::builtin_algebras() {
                println!(
                    "{:<14} |H|={:<3} |V|={:<3} {}",
                    fx.name,
                    fx.algebra.h_size(),
                    fx.algebra.v_size(),
                    fx.description
                );
            }
            Ok(YES)
        }
        FixtureAction::Emit { name, output } => {
            let fx = fixtures::fixture(&name).ok_or_else(|| usage(format!("unknown fixture `{name}`")))?;
            fs::create_dir_all(&output).map_err(|e| usage(format!("{}: {e}", output.display())))?;
            write(&output.join(format!("{name}.fa")), &write_algebra(&fx.algebra))?;
            write(&output.join(format!("{name}.lm")), &write_letter_map(&fx.letters))?;
            write(&output.join(format!("{name}.accept")), &write_accept(&fx.accept))?;
            Ok(YES)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { YES };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
