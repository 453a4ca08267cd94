//! Invariant suites with per-check residuals.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::born_rule_harness;
use crate::coupling::{self, build_coupled_basis, CouplingMatrix};
use crate::encoder::{self, build_hws, build_q_set, QOperatorSet};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix};
use crate::reference::{self, ReferenceCase};
use crate::spinsys::{self, Permutation, SpinRegister};

/// Frozen value of the four-to-three constituent reduction constant.
pub const REDUCTION_CONSTANT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    Coupling,
    Encoder,
    Reference,
    Hws,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["all", "coupling", "encoder", "reference", "hws"];

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "coupling" => Suite::Coupling,
            "encoder" => Suite::Encoder,
            "reference" => Suite::Reference,
            "hws" => Suite::Hws,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown suite {s:?}; expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [Suite::All, Suite::Coupling, Suite::Encoder, Suite::Reference, Suite::Hws]
            .iter()
            .position(|s| s == self)
            .expect("listed");
        f.write_str(Suite::NAMES[i])
    }
}

/// Replacement for one reference matrix, used to exercise the harness itself.
#[derive(Clone, Debug)]
pub struct ReferenceOverride {
    pub case: String,
    pub name: String,
    pub matrix: CMatrix,
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub suite: Suite,
    pub n_min: usize,
    pub n_max: usize,
    pub tol: f64,
    pub seed: u64,
    pub overrides: Vec<ReferenceOverride>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            suite: Suite::All,
            n_min: 3,
            n_max: 6,
            tol: linalg::DEFAULT_TOL,
            seed: 0,
            overrides: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// Passes when `residual ≤ tolerance`.
    AtMost,
    /// Passes when `residual ≥ tolerance`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub residual: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub n_range: [usize; 2],
    pub tolerance: f64,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Recorder {
    checks: Vec<Check>,
}

impl Recorder {
    fn at_most(&mut self, id: impl Into<String>, residual: f64, tolerance: f64) {
        self.checks.push(Check {
            id: id.into(),
            residual,
            tolerance,
            bound: Bound::AtMost,
            passed: residual <= tolerance,
        });
    }

    fn at_least(&mut self, id: impl Into<String>, residual: f64, tolerance: f64) {
        self.checks.push(Check {
            id: id.into(),
            residual,
            tolerance,
            bound: Bound::AtLeast,
            passed: residual >= tolerance,
        });
    }
}

fn q_set(n: usize, coupling: &CouplingMatrix) -> Result<QOperatorSet> {
    let reg = SpinRegister::new(n)?;
    build_q_set(&build_coupled_basis(reg, coupling)?)
}

pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.n_min > opts.n_max {
        return Err(Error::InvalidArgument(format!(
            "empty range {}..{}",
            opts.n_min, opts.n_max
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut rec = Recorder { checks: Vec::new() };
    for n in opts.n_min..=opts.n_max {
        if opts.suite.includes(Suite::Coupling) {
            coupling_suite(&mut rec, n, opts.tol)?;
        }
        if n < 3 {
            continue;
        }
        if opts.suite.includes(Suite::Encoder) {
            encoder_suite(&mut rec, n, opts.tol, opts.seed)?;
        }
        if opts.suite.includes(Suite::Hws) {
            hws_suite(&mut rec, n, opts.tol)?;
        }
    }
    if opts.suite.includes(Suite::Reference) {
        reference_suite(&mut rec, opts.tol, &opts.overrides)?;
    }
    let passed = rec.checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        suite: opts.suite,
        n_range: [opts.n_min, opts.n_max],
        tolerance: opts.tol,
        seed: opts.seed,
        passed,
        checks: rec.checks,
    })
}

fn coupling_suite(rec: &mut Recorder, n: usize, tol: f64) -> Result<()> {
    let reg = SpinRegister::new(n)?;
    let table = coupling::census_table(reg)?;
    let mismatch: u64 = table
        .iter()
        .map(|r| r.eigen_count.abs_diff(r.spec.multiplicity * r.spec.dimension))
        .sum();
    rec.at_most(format!("coupling/census/n={n}"), mismatch as f64, 0.0);
    let total: u64 = table.iter().map(|r| r.spec.multiplicity * r.spec.dimension).sum();
    rec.at_most(
        format!("coupling/dimension-sum/n={n}"),
        total.abs_diff(reg.dim() as u64) as f64,
        0.0,
    );
    if n < 3 {
        return Ok(());
    }
    let basis = build_coupled_basis(reg, &CouplingMatrix::fourier(n)?)?;
    rec.at_most(format!("coupling/gram/n={n}"), basis.gram_residual(), tol);
    let (j2, jz) = basis.sector_residuals()?;
    rec.at_most(format!("coupling/j-squared/n={n}"), j2, tol);
    rec.at_most(format!("coupling/jz/n={n}"), jz, tol);
    Ok(())
}

/// Dense checks of the `Q` algebra are run up to this size.
const DENSE_Q_MAX_N: usize = 6;

fn encoder_suite(rec: &mut Recorder, n: usize, tol: f64, seed: u64) -> Result<()> {
    let qs = q_set(n, &CouplingMatrix::fourier(n)?)?;
    let d = qs.d();
    let reg = qs.register();
    let r = qs.residuals();
    rec.at_most(format!("encoder/q-gram/n={n}"), r.closure, tol);
    rec.at_most(format!("encoder/q-spin-action/n={n}"), r.commutation, tol);

    if n <= DENSE_Q_MAX_N {
        let q = qs.all()?;
        let (mut closure, mut dagger, mut trace, mut comm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let zero = CMatrix::zeros(reg.dim(), reg.dim());
        for a in 0..d {
            for b in 0..d {
                dagger = dagger.max(q[a][b].dagger().max_diff(&q[b][a]));
                let target = if a == b { d as f64 } else { 0.0 };
                trace = trace.max((q[a][b].trace() - real(target)).norm());
                comm = comm.max(spinsys::collective_commutator_residual(reg, &q[a][b])?);
                for c in 0..d {
                    for e in 0..d {
                        let expect = if b == c { &q[a][e] } else { &zero };
                        closure = closure.max((&q[a][b] * &q[c][e]).max_diff(expect));
                    }
                }
            }
        }
        rec.at_most(format!("encoder/q-closure/n={n}"), closure, tol);
        rec.at_most(format!("encoder/q-dagger/n={n}"), dagger, tol);
        rec.at_most(format!("encoder/q-trace/n={n}"), trace, tol);
        rec.at_most(format!("encoder/q-commutation/n={n}"), comm, tol);
    } else {
        rec.at_most(format!("encoder/q-trace/n={n}"), r.trace, tol);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 32));
    let (mut round_trip, mut invariance, mut entropy) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..5 {
        let rho = encoder::random_density(d, &mut rng);
        let enc = encoder::encode_state(&qs, &rho)?;
        round_trip = round_trip.max(encoder::decode_state(&qs, &enc)?.matrix().max_diff(rho.matrix()));
        entropy = entropy.max(encoder::encoded_entropy_check(&rho, &enc)?.excess.abs());
        let povm = encoder::random_povm(d, d + 1, &mut rng)?;
        let els = encoder::encode_povm(&qs, &povm)?;
        for _ in 0..4 {
            let r = spinsys::collective_unitary(reg, &spinsys::haar_su2(&mut rng))?;
            for p in std::iter::once(&enc.payload).chain(els.iter().map(|e| &e.payload)) {
                invariance = invariance.max((&(&r * p) * &r.dagger()).max_diff(p));
            }
        }
    }
    rec.at_most(format!("encoder/round-trip/n={n}"), round_trip, tol);
    rec.at_most(format!("encoder/entropy/n={n}"), entropy, tol.max(1e-8));
    rec.at_most(format!("encoder/rotation-invariance/n={n}"), invariance, tol.max(1e-9));
    let born = born_rule_harness(&qs, 10, seed)?;
    rec.at_most(format!("encoder/born-rule/n={n}"), born.max_encoding_deviation, tol);
    rec.at_most(format!("encoder/born-rule-rotated/n={n}"), born.max_rotation_deviation, tol);
    Ok(())
}

fn hws_suite(rec: &mut Recorder, n: usize, tol: f64) -> Result<()> {
    let qs = q_set(n, &CouplingMatrix::fourier(n)?)?;
    let d = qs.d();
    let u = qs.embed(&encoder::clock(d))?;
    let v = qs.embed(&encoder::shift(d))?;
    let r = encoder::hws_residuals(&qs, &u, &v)?;
    rec.at_most(format!("hws/u-period/n={n}"), r.u_period, tol);
    rec.at_most(format!("hws/v-period/n={n}"), r.v_period, tol);
    rec.at_most(format!("hws/commutation/n={n}"), r.commutation, tol);
    rec.at_most(format!("hws/support/n={n}"), r.off_sector, tol);
    if n == 3 {
        let sz = &qs.q(1, 1)? - &qs.q(2, 2)?;
        let sx = &qs.q(1, 2)? + &qs.q(2, 1)?;
        rec.at_most("hws/u2-is-minus-sigma-z", u.max_diff(&(-&sz)), tol);
        rec.at_most("hws/v2-is-sigma-x", v.max_diff(&sx), tol);
    }
    Ok(())
}

fn case(id: &str, overrides: &[ReferenceOverride]) -> Result<ReferenceCase> {
    let mut c = reference::reference_case(id)?;
    for o in overrides.iter().filter(|o| o.case == id) {
        c.set(&o.name, o.matrix.clone())?;
    }
    Ok(c)
}

fn named<'a>(c: &'a ReferenceCase, name: &str) -> Result<&'a CMatrix> {
    c.get(name)
        .ok_or_else(|| Error::InvalidArgument(format!("case {} has no matrix {name}", c.id)))
}

/// Validates overrides before any check runs, so that a typo is a usage error.
pub fn check_overrides(overrides: &[ReferenceOverride]) -> Result<()> {
    for o in overrides {
        let mut c = reference::reference_case(&o.case)?;
        c.set(&o.name, o.matrix.clone())?;
    }
    Ok(())
}

fn reference_suite(rec: &mut Recorder, tol: f64, overrides: &[ReferenceOverride]) -> Result<()> {
    check_overrides(overrides)?;

    // Three constituents. The printed Q₁₂ carries ω₃ where the default Fourier
    // coupling gives Q₂₁; it is the Q₁₂ of the conjugate coupling.
    let n3c = q_set(3, &CouplingMatrix::conjugate_fourier(3)?)?;
    let n3f = q_set(3, &CouplingMatrix::fourier(3)?)?;
    let c = case("n3-q", overrides)?;
    for (a, b) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let name = format!("Q{a}{b}");
        let r = named(&c, &name)?;
        rec.at_most(format!("reference/n3-q/{name}"), r.max_diff(&n3c.q(a, b)?), tol);
        rec.at_most(
            format!("reference/n3-q/{name}-vs-default-relabeled"),
            r.max_diff(&n3f.q(3 - a, 3 - b)?),
            tol,
        );
        let comm = spinsys::collective_commutator_residual(SpinRegister::new(3)?, r)?;
        rec.at_most(format!("reference/n3-q/{name}-commutes-with-J"), comm, tol);
    }

    let c = case("n3-pauli", overrides)?;
    let gx = &n3c.q(1, 2)? + &n3c.q(2, 1)?;
    let gy = (&n3c.q(2, 1)? - &n3c.q(1, 2)?).scale(linalg::I);
    let gz = &n3c.q(1, 1)? - &n3c.q(2, 2)?;
    for (name, g) in [("sigma_x", &gx), ("sigma_y", &gy), ("sigma_z", &gz)] {
        rec.at_most(format!("reference/n3-pauli/{name}"), named(&c, name)?.max_diff(g), tol);
    }
    let forms = reference::n3_pauli_forms();
    for f in &forms {
        let swap = forms
            .iter()
            .find(|g| g.axis == f.axis && g.form == "swap")
            .expect("swap form");
        rec.at_most(
            format!("reference/n3-pauli/{:?}-{}-form", f.axis, f.form).to_lowercase(),
            f.matrix.max_diff(&swap.matrix),
            tol,
        );
    }

    let c = case("n3-trine", overrides)?;
    let i_half = n3c.sector_projector();
    let mut sum = CMatrix::zeros(8, 8);
    for k in 1..=3 {
        let rho = named(&c, &format!("rho_{k}"))?;
        sum += rho;
        // printed ρ_k has trace 2; ρ_k/2 is the normalized encoding
        let decoded = n3c.reduce(rho)?.scale_real(0.5);
        rec.at_most(
            format!("reference/n3-trine/logical_{k}"),
            decoded.max_diff(named(&c, &format!("logical_{k}"))?),
            tol,
        );
    }
    rec.at_most("reference/n3-trine/povm-completeness", sum.scale_real(2.0 / 3.0).max_diff(&i_half), tol);
    let half = CMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
    rec.at_most("reference/n3-trine/logical_3-value", named(&c, "logical_3")?.max_diff(&half), tol);

    // Four constituents, default Fourier coupling.
    let n4 = q_set(4, &CouplingMatrix::fourier(4)?)?;
    let reg4 = SpinRegister::new(4)?;
    let c = case("n4-akl", overrides)?;
    for m in &c.matrices {
        let res = if m.name.starts_with('L') {
            (&m.matrix * &m.matrix).max_diff(&CMatrix::identity(16))
        } else {
            m.matrix.hermiticity_residual()
        };
        rec.at_most(format!("reference/n4-akl/{}", m.name), res, tol);
    }

    let c = case("n4-q", overrides)?;
    for a in 1..=3 {
        for b in 1..=3 {
            let name = format!("Q{a}{b}");
            rec.at_most(format!("reference/n4-q/{name}"), named(&c, &name)?.max_diff(&n4.q(a, b)?), tol);
        }
    }

    let c = case("n4-hws", overrides)?;
    let hws = build_hws(&n4)?;
    let (u3, v3) = (named(&c, "U3")?, named(&c, "V3")?);
    rec.at_most("reference/n4-hws/U3", u3.max_diff(&hws.u), tol);
    rec.at_most("reference/n4-hws/V3", v3.max_diff(&hws.v), tol);
    let rel = encoder::hws_residuals(&n4, u3, v3)?;
    rec.at_most("reference/n4-hws/period", rel.u_period.max(rel.v_period), tol);
    rec.at_most("reference/n4-hws/commutation", rel.commutation, tol);

    let sym = coupling::symmetric_singlets(reg4)?;
    let cg = coupling::cg_singlets(reg4)?;
    let c = case("n4-singlet-proj", overrides)?;
    for (k, v) in sym.iter().enumerate() {
        let name = format!("proj_lambda_{}", k + 1);
        rec.at_most(
            format!("reference/n4-singlet-proj/{name}"),
            named(&c, &name)?.max_diff(&CMatrix::projector(v)),
            tol,
        );
    }
    let c = case("n4-cg-proj", overrides)?;
    for (k, v) in cg.iter().enumerate() {
        let name = format!("proj_S{}", k + 1);
        rec.at_most(
            format!("reference/n4-cg-proj/{name}"),
            named(&c, &name)?.max_diff(&CMatrix::projector(v)),
            tol,
        );
    }

    let c = case("n4-pauli", overrides)?;
    let layer = reference::PauliTriple {
        x: named(&c, "sigma_x")?.clone(),
        y: named(&c, "sigma_y")?.clone(),
        z: named(&c, "sigma_z")?.clone(),
    };
    let i0 = named(&c, "I_j0")?;
    let i0_generic = &CMatrix::projector(&sym[0]) + &CMatrix::projector(&sym[1]);
    rec.at_most("reference/n4-pauli/I_j0", i0.max_diff(&i0_generic), tol);
    rec.at_most("reference/n4-pauli/su2-algebra", layer.algebra_residual(i0), tol);

    let c = case("n4-sector-projectors", overrides)?;
    let basis4 = n4.basis();
    let mut top = CMatrix::zeros(16, 16);
    for v in basis4.top_sector() {
        top += &CMatrix::projector(v);
    }
    rec.at_most("reference/n4-sector-projectors/I_j2", named(&c, "I_j2")?.max_diff(&top), tol);
    rec.at_most(
        "reference/n4-sector-projectors/I_j1",
        named(&c, "I_j1")?.max_diff(&n4.sector_projector()),
        tol,
    );
    rec.at_most("reference/n4-sector-projectors/I_j0", named(&c, "I_j0")?.max_diff(&i0_generic), tol);

    // Permuting constituents maps the symmetric singlet pair onto itself but
    // not the successive-coupling pair.
    let sym_proj = [CMatrix::projector(&sym[0]), CMatrix::projector(&sym[1])];
    let cg_proj = [CMatrix::projector(&cg[0]), CMatrix::projector(&cg[1])];
    let (mut sym_res, mut cg_moved) = (0.0f64, 0.0f64);
    for p in Permutation::all(4) {
        let w = spinsys::permutation_operator(reg4, &p)?;
        let moved = |m: &CMatrix| &(&w * m) * &w.dagger();
        for m in &sym_proj {
            let pm = moved(m);
            sym_res = sym_res.max(pm.max_diff(&sym_proj[0]).min(pm.max_diff(&sym_proj[1])));
        }
        let pm = moved(&cg_proj[0]);
        cg_moved = cg_moved.max(pm.max_diff(&cg_proj[0]).min(pm.max_diff(&cg_proj[1])));
    }
    rec.at_most("reference/n4-permutations/symmetric-pair-invariant", sym_res, tol);
    rec.at_least("reference/n4-permutations/cg-pair-not-invariant", cg_moved, 1e-3);

    let red = reference::n4_to_n3_reduction()?;
    let worst = red.entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    rec.at_most("reference/n4-reduction/proportionality", worst, tol);
    let constant_err = red
        .entries
        .iter()
        .flat_map(|e| e.constants.iter())
        .map(|c| (c - REDUCTION_CONSTANT).abs())
        .fold(0.0, f64::max);
    rec.at_most("reference/n4-reduction/constant", constant_err, tol);
    Ok(())
}
