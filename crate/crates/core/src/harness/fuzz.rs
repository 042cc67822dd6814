//! Randomized check of the bordered-determinant identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::run::{TOOL, VERSION};
use crate::implicit::FieldJet;
use crate::quad::det_identity_check;

pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityEntry {
    pub n: usize,
    pub trials: usize,
    pub worst_ratio_deviation: f64,
    /// The sign when every trial agreed.
    pub sign: Option<i8>,
    pub signs_seen: Vec<i8>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuzzReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    pub entries: Vec<IdentityEntry>,
    pub pass: bool,
}

impl FuzzReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// A jet with gradient entries of magnitude in `[0.5, 2]` and Hessian
/// entries in `[-1, 1]`.
pub fn random_jet<R: Rng + ?Sized>(n: usize, rng: &mut R) -> FieldJet<f64> {
    let grad: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.5..=2.0);
            if rng.gen::<bool>() { m } else { -m }
        })
        .collect();
    let hess: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    FieldJet::from_parts(vec![0.0; n], 0.0, grad, |i, j| hess[i * n + j])
}

/// Each trial draws from its own stream, so results do not depend on the
/// order in which trials run.
pub fn fuzz_identity(n_list: &[usize], trials: usize, seed: u64) -> Result<FuzzReport> {
    if let Some(bad) = n_list.iter().find(|n| !(2..=6).contains(*n)) {
        return Err(Error::Validation { field: "n".into(), message: format!("{bad} is outside 2..=6") });
    }
    let mut entries = Vec::new();
    for &n in n_list {
        let mut worst: f64 = 0.0;
        let mut signs = Vec::new();
        for t in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((n as u64) << 32) | t as u64);
            let d = det_identity_check(&random_jet(n, &mut rng))?;
            let dev = (d.ratio - 1.0).abs();
            worst = if dev.is_nan() || worst.is_nan() { f64::NAN } else { worst.max(dev) };
            if !signs.contains(&d.sign) {
                signs.push(d.sign);
            }
        }
        signs.sort_unstable();
        let sign = if signs.len() == 1 { Some(signs[0]) } else { None };
        let pass = worst <= IDENTITY_TOL && signs.len() <= 1;
        entries.push(IdentityEntry { n, trials, worst_ratio_deviation: worst, sign, signs_seen: signs, pass });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(FuzzReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        seed,
        trials,
        tolerance: IDENTITY_TOL,
        entries,
        pass,
    })
}
