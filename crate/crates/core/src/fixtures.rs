//! The three-step toy model used across the test suites and the README.
//!
//! Metabolites A..E, E essential; `r1: A -> B` via e1 (coded by g1) and
//! `r2: B -> E` via e2 (coded by g2). Medium M_A supplies A, M_B supplies B.

pub const T1_MODEL: &str = "\
metabolite A
metabolite B
metabolite C
metabolite D
metabolite E
gene g1
gene g2
enzyme e1
enzyme e2
codes g1 e1
codes g2 e2
reaction r1 rev=0 enz=e1 sub=A prod=B
reaction r2 rev=0 enz=e2 sub=B prod=E
essential E
";

/// T1 with `codes(g2,e2)` removed, leaving e2 without a required gene.
pub const T1_INCOMPLETE_MODEL: &str = "\
metabolite A
metabolite B
metabolite C
metabolite D
metabolite E
gene g1
gene g2
enzyme e1
enzyme e2
codes g1 e1
reaction r1 rev=0 enz=e1 sub=A prod=B
reaction r2 rev=0 enz=e2 sub=B prod=E
essential E
";

pub const T1_ENV: &str = "\
base_cost 1.0
price A 2.0
price B 5.0
medium M_A A
medium M_B B
";

/// The fact removed from T1 to build [`T1_INCOMPLETE_MODEL`].
pub const T1_DELETED: &str = "codes(g2,e2)";
