//! Finite forest algebras over unordered forests.
//!
//! The crate covers the free forest algebra ([`forest`]), algebras given by
//! tables ([`algebra`]), wreath products ([`wreath`]), path-set machinery and
//! the Ψ-image engine ([`pathlang`]), the 2-distributivity decision
//! ([`twodist`]), derived forest categories ([`derived`]), text formats
//! ([`format`]), example algebras and languages ([`fixtures`]) and seeded
//! cross-checks against brute force ([`oracle`]).

pub mod algebra;
pub mod derived;
pub mod fixtures;
pub mod format;
pub mod forest;
pub mod oracle;
pub mod pathlang;
pub mod twodist;
pub mod wreath;
