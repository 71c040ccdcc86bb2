//! Universal constants of the indicator-profile limit.

/// Half-width `c` and height `theta` of the limiting rescaled profile
/// `theta * 1_{[-c, c]}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub c_crit: f64,
    pub theta_crit: f64,
}

/// `c_crit = (3/2)^{2/3}`, `theta_crit = (1/18)^{1/3}`; they satisfy
/// `2 * theta_crit * c_crit = 1`.
pub fn constants() -> Constants {
    Constants {
        c_crit: C_CRIT,
        theta_crit: THETA_CRIT,
    }
}

pub const C_CRIT: f64 = 1.310_370_697_104_448_3;
pub const THETA_CRIT: f64 = 0.381_571_414_184_443_96;
