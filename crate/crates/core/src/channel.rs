//! Collective-noise channel: every constituent sees the same unknown rotation.
//!
//! Each trial draws a single-qubit unitary `u`, applies `u^{⊗n}` to the encoded
//! state, decodes, and compares with the input. For `d = 2` the same `u` is
//! also applied to a bare physical qubit carrying the logical state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{build_coupled_basis, CouplingMatrix};
use crate::encoder::{
    self, build_q_set, decode_state, encode_povm, encode_state, encoded_probability, QOperatorSet, QuditPovm,
    QuditState,
};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix};
use crate::reference;
use crate::spinsys::{self, SpinRegister};

/// Eigenvalues of `√ρ σ √ρ` below this (relative to its largest) are treated as zero.
const SPECTRUM_FLOOR: f64 = 1e-14;
/// A state whose largest eigenvalue is within this of 1 is treated as pure.
const PURITY_TOL: f64 = 1e-12;

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() || !rho.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity of {}x{} and {}x{}",
            rho.rows(),
            rho.cols(),
            sigma.rows(),
            sigma.cols()
        )));
    }
    for (a, b) in [(rho, sigma), (sigma, rho)] {
        let eig = linalg::hermitian_eig(&hermitian_part(a))?;
        let top = eig.values.len() - 1;
        if eig.values[top] >= 1.0 - PURITY_TOL {
            let psi = eig.vectors.col(top);
            return Ok(psi.inner(&(b * &psi)).re.clamp(0.0, 1.0));
        }
    }
    let eig = linalg::hermitian_eig(&hermitian_part(rho))?;
    let sqrt_rho = eig.map_spectrum(|x| real(x.max(0.0).sqrt()));
    let m = hermitian_part(&(&(&sqrt_rho * sigma) * &sqrt_rho));
    let values = linalg::hermitian_eig(&m)?.values;
    let floor = SPECTRUM_FLOOR * values.last().copied().unwrap_or(0.0).max(1.0);
    let root: f64 = values.iter().filter(|&&x| x > floor).map(|x| x.sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

/// `½ Σ |eig(ρ − σ)|`.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let diff = hermitian_part(&(rho - sigma));
    Ok(0.5 * linalg::hermitian_eig(&diff)?.values.iter().map(|x| x.abs()).sum::<f64>())
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + &m.dagger()).scale_real(0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Haar-random SU(2) element per trial.
    Haar,
    /// The same rotation every trial.
    Fixed { axis: [f64; 3], angle: f64 },
    /// Collective z-rotation by an angle uniform on `[−width, width]`.
    ZDephasing { width: f64 },
}

impl NoiseModel {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CMatrix> {
        match self {
            NoiseModel::Haar => Ok(spinsys::haar_su2(rng)),
            NoiseModel::Fixed { axis, angle } => spinsys::qubit_rotation(*axis, *angle),
            NoiseModel::ZDephasing { width } => {
                let theta = if *width > 0.0 { rng.random_range(-*width..=*width) } else { 0.0 };
                spinsys::qubit_rotation([0.0, 0.0, 1.0], theta)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub noise: NoiseModel,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        if self.n < 3 {
            return Err(Error::Validation(format!(
                "the channel needs n ≥ 3 constituents, got {}",
                self.n
            )));
        }
        match &self.noise {
            NoiseModel::Haar => {}
            NoiseModel::Fixed { axis, angle } => {
                let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !angle.is_finite() || (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "fixed rotation needs a unit axis and finite angle, got |axis| = {norm}, angle = {angle}"
                    )));
                }
            }
            NoiseModel::ZDephasing { width } => {
                if !width.is_finite() || *width < 0.0 {
                    return Err(Error::Validation(format!(
                        "dephasing width must be finite and non-negative, got {width}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub fidelity: f64,
    pub trace_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bare_fidelity: Option<f64>,
    pub leakage: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Standard error of the mean.
    pub stderr: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Stats {
            mean,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelReport {
    pub config: ChannelConfig,
    pub input: CMatrix,
    pub per_trial: Vec<TrialRecord>,
    /// Statistics of the decoded-state fidelity.
    pub aggregate: Stats,
    pub trace_distance: Stats,
    pub max_leakage: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bare_aggregate: Option<Stats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ChannelReport {
    pub const CSV_HEADER: [&'static str; 5] = ["trial", "fidelity", "trace_distance", "bare_fidelity", "leakage"];

    /// Per-trial rows matching [`Self::CSV_HEADER`]; a missing bare fidelity is an empty field.
    pub fn csv_rows(&self) -> Vec<[String; 5]> {
        self.per_trial
            .iter()
            .map(|r| {
                [
                    r.trial.to_string(),
                    format!("{:.16e}", r.fidelity),
                    format!("{:.16e}", r.trace_distance),
                    r.bare_fidelity.map(|b| format!("{b:.16e}")).unwrap_or_default(),
                    format!("{:.16e}", r.leakage),
                ]
            })
            .collect()
    }
}

/// Per-trial generator: the seed picks the key, the trial index the stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn fourier_q_set(n: usize) -> Result<QOperatorSet> {
    let reg = SpinRegister::new(n)?;
    let basis = build_coupled_basis(reg, &CouplingMatrix::fourier(n)?)?;
    build_q_set(&basis)
}

/// Runs the channel with the Fourier coupling.
pub fn run_channel(cfg: &ChannelConfig, rho: &QuditState) -> Result<ChannelReport> {
    cfg.validate()?;
    let qs = fourier_q_set(cfg.n)?;
    run_channel_with(&qs, cfg, rho)
}

/// Runs the channel on an existing operator set.
pub fn run_channel_with(qs: &QOperatorSet, cfg: &ChannelConfig, rho: &QuditState) -> Result<ChannelReport> {
    cfg.validate()?;
    if qs.n() != cfg.n {
        return Err(Error::DimensionMismatch(format!(
            "operator set for n = {} used with config n = {}",
            qs.n(),
            cfg.n
        )));
    }
    if rho.d() != qs.d() {
        return Err(Error::DimensionMismatch(format!(
            "state has d = {}, n = {} carries d = {}",
            rho.d(),
            cfg.n,
            qs.d()
        )));
    }
    let enc = encode_state(qs, rho)?;
    let reg = qs.register();
    let bare = qs.d() == 2;

    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialRecord> {
            let mut rng = trial_rng(cfg.seed, trial);
            let u = cfg.noise.draw(&mut rng)?;
            let r = spinsys::collective_unitary(reg, &u)?;
            let rotated = &(&r * &enc.payload) * &r.dagger();
            let leakage = qs.leakage(&rotated)?;
            let out = decode_state(qs, &enc.with_payload(rotated)?)?;
            let bare_fidelity = if bare {
                let moved = &(&u * rho.matrix()) * &u.dagger();
                Some(fidelity(rho.matrix(), &moved)?)
            } else {
                None
            };
            Ok(TrialRecord {
                trial,
                fidelity: fidelity(rho.matrix(), out.matrix())?,
                trace_distance: trace_distance(rho.matrix(), out.matrix())?,
                bare_fidelity,
                leakage,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let fids: Vec<f64> = per_trial.iter().map(|r| r.fidelity).collect();
    let dists: Vec<f64> = per_trial.iter().map(|r| r.trace_distance).collect();
    let bare_fids: Vec<f64> = per_trial.iter().filter_map(|r| r.bare_fidelity).collect();
    Ok(ChannelReport {
        config: cfg.clone(),
        input: rho.matrix().clone(),
        aggregate: Stats::of(&fids),
        trace_distance: Stats::of(&dists),
        max_leakage: per_trial.iter().map(|r| r.leakage.abs()).fold(0.0, f64::max),
        bare_aggregate: bare.then(|| Stats::of(&bare_fids)),
        note: (!bare).then(|| format!("bare comparison omitted for d = {}", qs.d())),
        per_trial,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BornReport {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub seed: u64,
    /// `max |Tr(ρ^enc Π^enc) − Tr(ρ Π)|`.
    pub max_encoding_deviation: f64,
    /// `max |Tr(R ρ^enc R† Π^enc) − Tr(ρ^enc Π^enc)|` over random collective `R`.
    pub max_rotation_deviation: f64,
}

/// Random states against random `(d+1)`-outcome POVMs, before and after a
/// Haar-random collective rotation of the encoded state.
pub fn born_rule_harness(qs: &QOperatorSet, trials: usize, seed: u64) -> Result<BornReport> {
    let d = qs.d();
    let reg = qs.register();
    let devs = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(f64, f64)> {
            let mut rng = trial_rng(seed, trial);
            let rho = encoder::random_density(d, &mut rng);
            let povm = encoder::random_povm(d, d + 1, &mut rng)?;
            let enc = encode_state(qs, &rho)?;
            let els = encode_povm(qs, &povm)?;
            let r = spinsys::collective_unitary(reg, &spinsys::haar_su2(&mut rng))?;
            let rotated = enc.with_payload(&(&r * &enc.payload) * &r.dagger())?;
            let logical = povm.probabilities(&rho)?;
            let mut dev = (0.0f64, 0.0f64);
            for (e, p) in els.iter().zip(logical) {
                let q = encoded_probability(&enc, e)?;
                let q_rot = encoded_probability(&rotated, e)?;
                dev.0 = dev.0.max((q - p).abs());
                dev.1 = dev.1.max((q_rot - q).abs());
            }
            Ok(dev)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BornReport {
        n: qs.n(),
        d,
        trials,
        seed,
        max_encoding_deviation: devs.iter().map(|x| x.0).fold(0.0, f64::max),
        max_rotation_deviation: devs.iter().map(|x| x.1).fold(0.0, f64::max),
    })
}

/// `Tr(ρ_j^enc Π_k^enc)` for every state/element pair.
pub fn probability_table(qs: &QOperatorSet, states: &[QuditState], povm: &QuditPovm) -> Result<Vec<Vec<f64>>> {
    let els = encode_povm(qs, povm)?;
    states
        .iter()
        .map(|s| {
            let enc = encode_state(qs, s)?;
            els.iter().map(|e| encoded_probability(&enc, e)).collect()
        })
        .collect()
}

/// The three logical trine states and the POVM `{(2/3) ρ_k}`.
pub fn trine_ensemble() -> Result<(Vec<QuditState>, QuditPovm)> {
    let logical = reference::n3_trine().logical;
    let states = logical
        .iter()
        .map(|m| QuditState::new(m.clone()))
        .collect::<Result<Vec<_>>>()?;
    let povm = QuditPovm::new(logical.iter().map(|m| m.scale_real(2.0 / 3.0)).collect())?;
    Ok((states, povm))
}
