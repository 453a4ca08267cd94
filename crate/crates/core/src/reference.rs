//! Literal closed forms for three and four constituents, written in terms of
//! swaps `P_jk`, singlet projectors `S_jk = (1 − P_jk)/2` and Pauli operators only.
//!
//! Nothing here depends on the coupling module, so these matrices serve as an
//! independent check of the generic construction.
//!
//! Four printed expressions are known to be inconsistent with the rest and are
//! exposed separately under `*_as_printed`:
//! `Q₁₃` for four constituents (the sign of the `L` term belongs to `Q₃₁`),
//! `U₃` (the `K` coefficient is twice too large), and the labels of the two
//! successive-coupling singlet projectors, which are swapped.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, real, root_of_unity, CMatrix, Complex64, I, ONE};
use crate::spinsys::{self, Axis, Permutation, SpinRegister};

/// Largest disagreement tolerated between two printed forms of one operator.
pub const TRANSCRIPTION_TOL: f64 = 1e-12;

fn reg(n: usize) -> SpinRegister {
    SpinRegister::new(n).expect("small register")
}

fn p(r: SpinRegister, j: usize, k: usize) -> CMatrix {
    spinsys::swap(r, j, k).expect("valid swap")
}

fn s(r: SpinRegister, j: usize, k: usize) -> CMatrix {
    spinsys::singlet_projector(r, j, k).expect("valid singlet projector")
}

fn dot(r: SpinRegister, j: usize, k: usize) -> CMatrix {
    spinsys::spin_dot(r, j, k).expect("valid spin product")
}

fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.commutator(b)
}

fn lin(terms: &[(Complex64, &CMatrix)]) -> CMatrix {
    let dim = terms[0].1.rows();
    let mut acc = CMatrix::zeros(dim, dim);
    for (c, m) in terms {
        acc.add_scaled(*c, m);
    }
    acc
}

fn agree(check: &str, a: &CMatrix, b: &CMatrix) -> Result<()> {
    let r = a.max_diff(b);
    if r > TRANSCRIPTION_TOL {
        return Err(Error::consistency(format!("transcription: {check}"), r));
    }
    Ok(())
}

fn w3() -> Complex64 {
    root_of_unity(3, 1)
}

/// Three logical Pauli operators `(σx, σy, σz)`.
#[derive(Clone, Debug)]
pub struct PauliTriple {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

impl PauliTriple {
    pub fn component(&self, axis: Axis) -> &CMatrix {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    /// `max ‖σ_a σ_b − δ_ab I − i ε_abc σ_c‖` with `I` the given sector projector.
    pub fn algebra_residual(&self, identity: &CMatrix) -> f64 {
        let ops = [&self.x, &self.y, &self.z];
        let mut worst = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                let lhs = ops[a] * ops[b];
                let rhs = if a == b {
                    identity.clone()
                } else {
                    let c = 3 - a - b;
                    let sign = if (a + 1) % 3 == b { 1.0 } else { -1.0 };
                    ops[c].scale(I * sign)
                };
                worst = worst.max(lhs.max_diff(&rhs));
            }
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// three constituents

/// `Q₁₁, Q₁₂, Q₂₁, Q₂₂` for three constituents.
#[derive(Clone, Debug)]
pub struct N3Q {
    pub q11: CMatrix,
    pub q12: CMatrix,
    pub q21: CMatrix,
    pub q22: CMatrix,
}

impl N3Q {
    /// Indexed `[λ−1][λ′−1]`.
    pub fn as_grid(&self) -> Vec<Vec<CMatrix>> {
        vec![
            vec![self.q11.clone(), self.q12.clone()],
            vec![self.q21.clone(), self.q22.clone()],
        ]
    }
}

/// `Q₁₂ = Q₂₁† = (P₁₂ + ω₃P₂₃ + ω₃²P₃₁)/3` and
/// `Q₁₁, Q₂₂ = 1/2 − (P₁₂+P₂₃+P₃₁)/6 ∓ (i/√12)[P₃₁, P₁₂]`.
pub fn n3_q_operators() -> N3Q {
    let r = reg(3);
    let (p12, p23, p31) = (p(r, 1, 2), p(r, 2, 3), p(r, 3, 1));
    let w = w3();
    let q12 = lin(&[(real(1.0 / 3.0), &p12), (w / 3.0, &p23), (w * w / 3.0, &p31)]);
    let q21 = q12.dagger();
    let id = CMatrix::identity(8);
    let c = comm(&p31, &p12);
    let base = lin(&[(real(0.5), &id), (real(-1.0 / 6.0), &p12), (real(-1.0 / 6.0), &p23), (real(-1.0 / 6.0), &p31)]);
    let k = I / 12f64.sqrt();
    let q11 = lin(&[(ONE, &base), (-k, &c)]);
    let q22 = lin(&[(ONE, &base), (k, &c)]);
    N3Q { q11, q12, q21, q22 }
}

/// `I_{j=1/2} = 1 − (P₁₂+P₂₃+P₃₁)/3`.
pub fn n3_sector_projector() -> CMatrix {
    let r = reg(3);
    lin(&[
        (ONE, &CMatrix::identity(8)),
        (real(-1.0 / 3.0), &p(r, 1, 2)),
        (real(-1.0 / 3.0), &p(r, 2, 3)),
        (real(-1.0 / 3.0), &p(r, 3, 1)),
    ])
}

/// One printed form of one Pauli component.
#[derive(Clone, Debug)]
pub struct PauliForm {
    pub axis: Axis,
    pub form: &'static str,
    pub formula: &'static str,
    pub matrix: CMatrix,
}

/// Every printed form of the three-constituent Pauli operators.
pub fn n3_pauli_forms() -> Vec<PauliForm> {
    let r = reg(3);
    let q = n3_q_operators();
    let (p12, p23, p31) = (p(r, 1, 2), p(r, 2, 3), p(r, 3, 1));
    let (d12, d23, d31) = (dot(r, 1, 2), dot(r, 2, 3), dot(r, 3, 1));
    let s12 = 12f64.sqrt();

    // (σ⁽¹⁾ × σ⁽²⁾) · σ⁽³⁾ = Σ ε_abc σ_a⁽¹⁾ σ_b⁽²⁾ σ_c⁽³⁾
    let sig = |site: usize, a: usize| spinsys::sigma(r, site, Axis::ALL[a].site_op()).expect("site");
    let mut triple = CMatrix::zeros(8, 8);
    for (a, b, c, sign) in [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0), (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0)] {
        let term = &(&sig(1, a) * &sig(2, b)) * &sig(3, c);
        triple.add_scaled(real(sign), &term);
    }

    vec![
        PauliForm {
            axis: Axis::X,
            form: "q",
            formula: "Q12 + Q21",
            matrix: &q.q12 + &q.q21,
        },
        PauliForm {
            axis: Axis::X,
            form: "swap",
            formula: "(2 P12 - P23 - P31)/3",
            matrix: lin(&[(real(2.0 / 3.0), &p12), (real(-1.0 / 3.0), &p23), (real(-1.0 / 3.0), &p31)]),
        },
        PauliForm {
            axis: Axis::X,
            form: "dot",
            formula: "(2 s1.s2 - s2.s3 - s3.s1)/6",
            matrix: lin(&[(real(2.0 / 6.0), &d12), (real(-1.0 / 6.0), &d23), (real(-1.0 / 6.0), &d31)]),
        },
        PauliForm {
            axis: Axis::Y,
            form: "q",
            formula: "-i Q12 + i Q21",
            matrix: lin(&[(-I, &q.q12), (I, &q.q21)]),
        },
        PauliForm {
            axis: Axis::Y,
            form: "swap",
            formula: "(P23 - P31)/sqrt(3)",
            matrix: lin(&[(real(1.0 / 3f64.sqrt()), &p23), (real(-1.0 / 3f64.sqrt()), &p31)]),
        },
        PauliForm {
            axis: Axis::Y,
            form: "dot",
            formula: "(s2.s3 - s3.s1)/sqrt(12)",
            matrix: lin(&[(real(1.0 / s12), &d23), (real(-1.0 / s12), &d31)]),
        },
        PauliForm {
            axis: Axis::Z,
            form: "q",
            formula: "Q11 - Q22",
            matrix: &q.q11 - &q.q22,
        },
        PauliForm {
            axis: Axis::Z,
            form: "swap",
            formula: "-i [P31, P12]/sqrt(3)",
            matrix: comm(&p31, &p12).scale(-I / 3f64.sqrt()),
        },
        PauliForm {
            axis: Axis::Z,
            form: "triple",
            formula: "-(s1 x s2).s3/sqrt(12)",
            matrix: triple.scale_real(-1.0 / s12),
        },
    ]
}

/// Swap forms of the three-constituent Pauli operators, after checking that
/// every printed form of each component agrees.
pub fn n3_pauli() -> Result<PauliTriple> {
    let forms = n3_pauli_forms();
    let pick = |axis: Axis| -> Result<CMatrix> {
        let of_axis: Vec<&PauliForm> = forms.iter().filter(|f| f.axis == axis).collect();
        let swap = of_axis.iter().find(|f| f.form == "swap").expect("swap form");
        for f in &of_axis {
            agree(&format!("sigma_{axis:?}: {} vs {}", f.formula, swap.formula), &f.matrix, &swap.matrix)?;
        }
        Ok(swap.matrix.clone())
    };
    Ok(PauliTriple {
        x: pick(Axis::X)?,
        y: pick(Axis::Y)?,
        z: pick(Axis::Z)?,
    })
}

/// Trine states `ρ₁ = (1−P₂₃)/2`, `ρ₂ = (1−P₃₁)/2`, `ρ₃ = (1−P₁₂)/2`.
///
/// As written each has trace 2: it is `I_2 ⊗ ρ` on the sector, without the
/// `1/d` of a normalized encoding. `normalized` holds `ρ_k/2`.
#[derive(Clone, Debug)]
pub struct N3Trine {
    pub states: [CMatrix; 3],
    pub normalized: [CMatrix; 3],
    /// `(1/2) Tr(Q_{λ′λ} ρ_k)` with the `Q`'s above.
    pub logical: [CMatrix; 3],
}

pub fn n3_trine() -> N3Trine {
    let r = reg(3);
    let id = CMatrix::identity(8);
    let rho = |j, k| lin(&[(real(0.5), &id), (real(-0.5), &p(r, j, k))]);
    let states = [rho(2, 3), rho(3, 1), rho(1, 2)];
    let q = n3_q_operators();
    let grid = q.as_grid();
    let logical = states.clone().map(|st| {
        let mut m = CMatrix::zeros(2, 2);
        for l in 0..2 {
            for lp in 0..2 {
                m[(l, lp)] = linalg::trace_product(&grid[lp][l], &st).expect("8x8") * 0.5;
            }
        }
        m
    });
    let normalized = states.clone().map(|st| st.scale_real(0.5));
    N3Trine {
        states,
        normalized,
        logical,
    }
}

// ---------------------------------------------------------------------------
// four constituents

/// `A_i`, `K_i`, `L_i` built from four-constituent swaps.
#[derive(Clone, Debug)]
pub struct Akl {
    pub a: [CMatrix; 3],
    pub k: [CMatrix; 4],
    pub l: [CMatrix; 3],
}

impl Akl {
    pub fn k_sum(&self) -> CMatrix {
        let mut acc = self.k[0].clone();
        for k in &self.k[1..] {
            acc += k;
        }
        acc
    }
}

/// `A₁ = P₁₂ − P₃₄`, `A₂ = P₁₃ − P₂₄`, `A₃ = P₁₄ − P₂₃`,
/// `K₁ = i[P₂₃,P₂₄]`, `K₂ = i[P₃₄,P₁₃]`, `K₃ = i[P₁₄,P₂₄]`, `K₄ = i[P₁₂,P₁₃]`,
/// `L₁ = P₁₂P₃₄`, `L₂ = P₁₃P₂₄`, `L₃ = P₁₄P₂₃`.
pub fn n4_akl() -> Akl {
    let r = reg(4);
    let pp = |j, k| p(r, j, k);
    let ik = |a: CMatrix, b: CMatrix| comm(&a, &b).scale(I);
    Akl {
        a: [&pp(1, 2) - &pp(3, 4), &pp(1, 3) - &pp(2, 4), &pp(1, 4) - &pp(2, 3)],
        k: [
            ik(pp(2, 3), pp(2, 4)),
            ik(pp(3, 4), pp(1, 3)),
            ik(pp(1, 4), pp(2, 4)),
            ik(pp(1, 2), pp(1, 3)),
        ],
        l: [&pp(1, 2) * &pp(3, 4), &pp(1, 3) * &pp(2, 4), &pp(1, 4) * &pp(2, 3)],
    }
}

/// `Q₁₃` exactly as printed, `(A₂ + i(L₁ − L₃))/4`. This equals `Q₃₁`.
pub fn n4_q13_as_printed() -> CMatrix {
    let akl = n4_akl();
    let l13 = &akl.l[0] - &akl.l[2];
    lin(&[(real(0.25), &akl.a[1]), (I * 0.25, &l13)])
}

/// The nine `Q_{λλ′}` for four constituents, indexed `[λ−1][λ′−1]`.
///
/// `Q₁₃ = (A₂ − i(L₁ − L₃))/4`; the printed sign of the `L` term is that of
/// `Q₃₁`, as the printed `V₃` confirms.
pub fn n4_q_operators() -> Vec<Vec<CMatrix>> {
    let akl = n4_akl();
    let id = CMatrix::identity(16);
    let ks = akl.k_sum();
    let [a1, a2, a3] = &akl.a;
    let [k1, k2, k3, k4] = &akl.k;
    let [l1, l2, l3] = &akl.l;
    let q11 = lin(&[(real(0.25), &id), (real(-0.125), &ks), (real(-0.25), l2)]);
    let q22 = lin(&[(real(0.25), &id), (real(-0.25), l1), (real(0.25), l2), (real(-0.25), l3)]);
    let q33 = lin(&[(real(0.25), &id), (real(0.125), &ks), (real(-0.25), l2)]);
    let k13 = k1 - k3;
    let k24 = k2 - k4;
    let one_p_i = real(1.0) + I;
    let one_m_i = real(1.0) - I;
    let q12 = lin(&[(one_p_i / 8.0, a1), (-one_m_i / 8.0, a3), (-I / 8.0, &k13), (real(-0.125), &k24)]);
    let q23 = lin(&[(one_p_i / 8.0, a1), (-one_m_i / 8.0, a3), (I / 8.0, &k13), (real(0.125), &k24)]);
    let l13 = l1 - l3;
    let q13 = lin(&[(real(0.25), a2), (-I * 0.25, &l13)]);
    vec![
        vec![q11, q12.clone(), q13.clone()],
        vec![q12.dagger(), q22, q23.clone()],
        vec![q13.dagger(), q23.dagger(), q33],
    ]
}

/// `U₃` exactly as printed, `(ω₃²/4)[−L₁ + 2L₂ − L₃ + √3 i ΣK]`. It is not of period 3.
pub fn n4_u3_as_printed() -> CMatrix {
    u3_with_k_coefficient(3f64.sqrt())
}

fn u3_with_k_coefficient(kc: f64) -> CMatrix {
    let akl = n4_akl();
    let w2 = w3() * w3();
    let ks = akl.k_sum();
    lin(&[
        (-w2 / 4.0, &akl.l[0]),
        (w2 / 2.0, &akl.l[1]),
        (-w2 / 4.0, &akl.l[2]),
        (w2 * I * (kc / 4.0), &ks),
    ])
}

#[derive(Clone, Debug)]
pub struct N4Hws {
    pub u3: CMatrix,
    pub v3: CMatrix,
}

/// `U₃ = (ω₃²/4)[−L₁ + 2L₂ − L₃ + (√3/2) i ΣK]` and
/// `V₃ = [i(L₁ − L₃) + (1+i)A₁ + A₂ − (1−i)A₃]/4`.
pub fn n4_hws() -> N4Hws {
    let akl = n4_akl();
    let l13 = &akl.l[0] - &akl.l[2];
    let v3 = lin(&[
        (I * 0.25, &l13),
        ((real(1.0) + I) / 4.0, &akl.a[0]),
        (real(0.25), &akl.a[1]),
        (-(real(1.0) - I) / 4.0, &akl.a[2]),
    ]);
    N4Hws {
        u3: u3_with_k_coefficient(3f64.sqrt() / 2.0),
        v3,
    }
}

/// Operators on the two-dimensional `j = 0` sector of four constituents.
#[derive(Clone, Debug)]
pub struct SingletLayer {
    /// `|0,0;λ⟩⟨0,0;λ|` for λ = 1, 2.
    pub proj: [CMatrix; 2],
    /// Successive-coupling projectors `|S₁⟩⟨S₁|`, `|S₂⟩⟨S₂|`.
    pub cg: [CMatrix; 2],
    pub pauli: PauliTriple,
    pub identity: CMatrix,
}

fn singlet_commutators(r: SpinRegister) -> CMatrix {
    let ss = |j, k| s(r, j, k);
    let mut c = comm(&ss(1, 2), &ss(1, 3));
    c = &c - &comm(&ss(2, 3), &ss(2, 4));
    c = &c + &comm(&ss(3, 4), &ss(3, 1));
    &c - &comm(&ss(4, 1), &ss(4, 2))
}

/// Products `(S₁₂S₃₄, S₁₃S₂₄, S₁₄S₂₃)`.
fn singlet_pairs(r: SpinRegister) -> [CMatrix; 3] {
    [
        &s(r, 1, 2) * &s(r, 3, 4),
        &s(r, 1, 3) * &s(r, 2, 4),
        &s(r, 1, 4) * &s(r, 2, 3),
    ]
}

/// The successive-coupling projectors with their printed labels:
/// `(−S₁₂S₃₄ + 2S₁₃S₂₄ + 2S₁₄S₂₃)/3` as `|S₁⟩⟨S₁|` and `S₁₂S₃₄` as `|S₂⟩⟨S₂|`.
pub fn n4_cg_projectors_as_printed() -> [CMatrix; 2] {
    let [a, b] = n4_singlet_layer().cg;
    [b, a]
}

pub fn n4_singlet_layer() -> SingletLayer {
    let r = reg(4);
    let [s1234, s1324, s1423] = singlet_pairs(r);
    let c = singlet_commutators(r);
    let third = real(1.0 / 3.0);
    let base = lin(&[(third, &s1234), (third, &s1324), (third, &s1423)]);
    let k = 1.0 / 12f64.sqrt();
    // i(−1)^λ/√12 for λ = 1, 2
    let proj = [lin(&[(ONE, &base), (-I * k, &c)]), lin(&[(ONE, &base), (I * k, &c)])];
    let cg = [
        s1234.clone(),
        lin(&[(-third, &s1234), (third * 2.0, &s1324), (third * 2.0, &s1423)]),
    ];
    let x = lin(&[(real(-4.0 / 3.0), &s1234), (real(2.0 / 3.0), &s1423), (real(2.0 / 3.0), &s1324)]);
    let y = lin(&[(real(-2.0 / 3f64.sqrt()), &s1324), (real(2.0 / 3f64.sqrt()), &s1423)]);
    let z = c.scale(-I / 3f64.sqrt());
    let identity = lin(&[(real(2.0 / 3.0), &s1234), (real(2.0 / 3.0), &s1324), (real(2.0 / 3.0), &s1423)]);
    SingletLayer {
        proj,
        cg,
        pauli: PauliTriple { x, y, z },
        identity,
    }
}

/// Projectors onto `j = 2, 1, 0` for four constituents.
pub fn n4_sector_projectors() -> [CMatrix; 3] {
    let q = n4_q_operators();
    let i1 = &(&q[0][0] + &q[1][1]) + &q[2][2];
    let i0 = n4_singlet_layer().identity;
    let i2 = &(&CMatrix::identity(16) - &i1) - &i0;
    [i2, i1, i0]
}

/// How one traced-out constituent relates the four- and three-constituent Paulis.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionEntry {
    /// Constituent traced out, 1-based.
    pub traced: usize,
    /// Relabeling `W` of the three remaining constituents with
    /// `Tr_t σ_a⁽⁴⁾ = c · W σ_a⁽³⁾ W†`.
    pub permutation: Option<Permutation>,
    /// Fitted constant for each of x, y, z.
    pub constants: [f64; 3],
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub entries: Vec<ReductionEntry>,
    /// Common constant, when every entry found one.
    pub constant: Option<f64>,
    pub consistent: bool,
}

pub const REDUCTION_TOL: f64 = 1e-10;

/// Traces each four-constituent Pauli over each constituent and searches the
/// six relabelings of the rest for a single proportionality constant.
pub fn n4_to_n3_reduction() -> Result<ReductionReport> {
    let four = n4_singlet_layer().pauli;
    let three = n3_pauli()?;
    let r3 = reg(3);
    let mut entries = Vec::new();
    for t in 1..=4 {
        let reduced: Vec<CMatrix> = Axis::ALL
            .iter()
            .map(|&a| linalg::partial_trace(four.component(a), 4, t))
            .collect::<Result<_>>()?;
        let mut best: Option<ReductionEntry> = None;
        for perm in Permutation::all(3) {
            let w = spinsys::permutation_operator(r3, &perm)?;
            let mut constants = [0.0; 3];
            let mut residual = 0.0f64;
            for (i, &a) in Axis::ALL.iter().enumerate() {
                let target = &(&w * three.component(a)) * &w.dagger();
                // least-squares c for reduced ≈ c · target
                let c = target.inner(&reduced[i]) / target.inner(&target);
                constants[i] = c.re;
                residual = residual.max(reduced[i].max_diff(&target.scale(c)));
                residual = residual.max(c.im.abs());
            }
            let spread = constants.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - constants.iter().cloned().fold(f64::INFINITY, f64::min);
            let score = residual.max(spread);
            let entry = ReductionEntry {
                traced: t,
                permutation: Some(perm),
                constants,
                residual: score,
            };
            if best.as_ref().is_none_or(|b| score < b.residual) {
                best = Some(entry);
            }
        }
        let mut entry = best.expect("six permutations");
        if entry.residual > REDUCTION_TOL {
            entry.permutation = None;
        }
        entries.push(entry);
    }
    let consistent_each = entries.iter().all(|e| e.permutation.is_some());
    let c0 = entries[0].constants[0];
    let consistent = consistent_each
        && entries
            .iter()
            .all(|e| e.constants.iter().all(|c| (c - c0).abs() <= REDUCTION_TOL));
    Ok(ReductionReport {
        constant: consistent.then_some(c0),
        consistent,
        entries,
    })
}

// ---------------------------------------------------------------------------
// named cases

pub const CASE_IDS: [&str; 10] = [
    "n3-q",
    "n3-pauli",
    "n3-trine",
    "n4-akl",
    "n4-q",
    "n4-hws",
    "n4-singlet-proj",
    "n4-cg-proj",
    "n4-pauli",
    "n4-sector-projectors",
];

/// A named collection of reference matrices with the formulas they came from.
#[derive(Clone, Debug, Serialize)]
pub struct ReferenceCase {
    pub id: String,
    pub matrices: Vec<NamedMatrix>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedMatrix {
    pub name: String,
    pub formula: String,
    pub matrix: CMatrix,
}

impl ReferenceCase {
    pub fn get(&self, name: &str) -> Option<&CMatrix> {
        self.matrices.iter().find(|m| m.name == name).map(|m| &m.matrix)
    }

    /// Replaces the matrix called `name`.
    pub fn set(&mut self, name: &str, matrix: CMatrix) -> Result<()> {
        let slot = self
            .matrices
            .iter_mut()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("case {} has no matrix {name:?}", self.id)))?;
        if slot.matrix.shape() != matrix.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, replacement is {}x{}",
                slot.matrix.rows(),
                slot.matrix.cols(),
                matrix.rows(),
                matrix.cols()
            )));
        }
        slot.matrix = matrix;
        Ok(())
    }
}

fn named(name: &str, formula: &str, matrix: CMatrix) -> NamedMatrix {
    NamedMatrix {
        name: name.into(),
        formula: formula.into(),
        matrix,
    }
}

pub fn reference_case(id: &str) -> Result<ReferenceCase> {
    let matrices = match id {
        "n3-q" => {
            let q = n3_q_operators();
            vec![
                named("Q12", "(P12 + w3 P23 + w3^2 P31)/3", q.q12),
                named("Q21", "Q12^dagger", q.q21),
                named("Q11", "1/2 - (P12+P23+P31)/6 - i [P31,P12]/sqrt(12)", q.q11),
                named("Q22", "1/2 - (P12+P23+P31)/6 + i [P31,P12]/sqrt(12)", q.q22),
            ]
        }
        "n3-pauli" => {
            let s = n3_pauli()?;
            vec![
                named("sigma_x", "(2 P12 - P23 - P31)/3", s.x),
                named("sigma_y", "(P23 - P31)/sqrt(3)", s.y),
                named("sigma_z", "-i [P31, P12]/sqrt(3)", s.z),
            ]
        }
        "n3-trine" => {
            let t = n3_trine();
            let [r1, r2, r3] = t.states;
            let [g1, g2, g3] = t.logical;
            vec![
                named("rho_1", "(1 - P23)/2", r1),
                named("rho_2", "(1 - P31)/2", r2),
                named("rho_3", "(1 - P12)/2", r3),
                named("logical_1", "Tr(Q_l'l rho_1)/2", g1),
                named("logical_2", "Tr(Q_l'l rho_2)/2", g2),
                named("logical_3", "Tr(Q_l'l rho_3)/2", g3),
            ]
        }
        "n4-akl" => {
            let akl = n4_akl();
            let [a1, a2, a3] = akl.a;
            let [k1, k2, k3, k4] = akl.k;
            let [l1, l2, l3] = akl.l;
            vec![
                named("A1", "P12 - P34", a1),
                named("A2", "P13 - P24", a2),
                named("A3", "P14 - P23", a3),
                named("K1", "i [P23, P24]", k1),
                named("K2", "i [P34, P13]", k2),
                named("K3", "i [P14, P24]", k3),
                named("K4", "i [P12, P13]", k4),
                named("L1", "P12 P34", l1),
                named("L2", "P13 P24", l2),
                named("L3", "P14 P23", l3),
            ]
        }
        "n4-q" => {
            let q = n4_q_operators();
            let formulas = [
                ["[1 - (K1+K2+K3+K4)/2 - L2]/4", "[(1+i)A1 - (1-i)A3 - i(K1-K3) - (K2-K4)]/8", "[A2 - i(L1-L3)]/4"],
                ["Q12^dagger", "(1 - L1 + L2 - L3)/4", "[(1+i)A1 - (1-i)A3 + i(K1-K3) + (K2-K4)]/8"],
                ["Q13^dagger", "Q23^dagger", "[1 + (K1+K2+K3+K4)/2 - L2]/4"],
            ];
            let mut out = Vec::new();
            for (a, row) in q.into_iter().enumerate() {
                for (b, m) in row.into_iter().enumerate() {
                    out.push(named(&format!("Q{}{}", a + 1, b + 1), formulas[a][b], m));
                }
            }
            out
        }
        "n4-hws" => {
            let h = n4_hws();
            vec![
                named("U3", "(w3^2/4)[-L1 + 2 L2 - L3 + (sqrt(3)/2) i (K1+K2+K3+K4)]", h.u3),
                named("V3", "[i(L1-L3) + (1+i)A1 + A2 - (1-i)A3]/4", h.v3),
            ]
        }
        "n4-singlet-proj" => {
            let [p1, p2] = n4_singlet_layer().proj;
            let f1 = "(S12S34+S13S24+S14S23)/3 - i([S12,S13]-[S23,S24]+[S34,S31]-[S41,S42])/sqrt(12)";
            let f2 = "(S12S34+S13S24+S14S23)/3 + i([S12,S13]-[S23,S24]+[S34,S31]-[S41,S42])/sqrt(12)";
            vec![named("proj_lambda_1", f1, p1), named("proj_lambda_2", f2, p2)]
        }
        "n4-cg-proj" => {
            let [c1, c2] = n4_singlet_layer().cg;
            vec![
                named("proj_S1", "S12 S34", c1),
                named("proj_S2", "(-S12S34 + 2 S13S24 + 2 S14S23)/3", c2),
            ]
        }
        "n4-pauli" => {
            let l = n4_singlet_layer();
            vec![
                named("sigma_x", "-(2/3)(2 S12S34 - S14S23 - S13S24)", l.pauli.x),
                named("sigma_y", "-(2/sqrt(3))(S13S24 - S14S23)", l.pauli.y),
                named("sigma_z", "-i([S12,S13]-[S23,S24]+[S34,S31]-[S41,S42])/sqrt(3)", l.pauli.z),
                named("I_j0", "(2/3)(S12S34 + S13S24 + S14S23)", l.identity),
            ]
        }
        "n4-sector-projectors" => {
            let [i2, i1, i0] = n4_sector_projectors();
            vec![
                named("I_j2", "1 - I_j1 - I_j0", i2),
                named("I_j1", "Q11 + Q22 + Q33", i1),
                named("I_j0", "(2/3)(S12S34 + S13S24 + S14S23)", i0),
            ]
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown reference case {other:?}; valid ids: {}",
                CASE_IDS.join(", ")
            )))
        }
    };
    Ok(ReferenceCase {
        id: id.into(),
        matrices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r4() -> SpinRegister {
        reg(4)
    }

    #[test]
    fn n3_q_algebra() {
        let q = n3_q_operators();
        let g = q.as_grid();
        for a in 0..2 {
            for b in 0..2 {
                assert!(g[a][b].dagger().max_diff(&g[b][a]) < 1e-14);
                for c in 0..2 {
                    for e in 0..2 {
                        let lhs = &g[a][b] * &g[c][e];
                        let rhs = if b == c { g[a][e].clone() } else { CMatrix::zeros(8, 8) };
                        assert!(lhs.max_diff(&rhs) < 1e-12, "Q{a}{b} Q{c}{e}");
                    }
                }
                let r = spinsys::collective_commutator_residual(reg(3), &g[a][b]).unwrap();
                assert!(r < 1e-12);
            }
        }
        assert!((&q.q11 + &q.q22).max_diff(&n3_sector_projector()) < 1e-14);
        assert!((&q.q12 * &q.q21).max_diff(&q.q11) < 1e-12);
        assert!((&q.q21 * &q.q12).max_diff(&q.q22) < 1e-12);
    }

    #[test]
    fn n3_pauli_forms_agree() {
        let s = n3_pauli().unwrap();
        let id = n3_sector_projector();
        assert!((&s.z * &s.z).max_diff(&id) < 1e-12);
        assert!(s.algebra_residual(&id) < 1e-10);
        assert_eq!(n3_pauli_forms().len(), 9);
    }

    #[test]
    fn trine_examples() {
        let t = n3_trine();
        let half = CMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        assert!(t.logical[2].max_diff(&half) < 1e-14);
        let mut sum = CMatrix::zeros(8, 8);
        for st in &t.states {
            sum += st;
            assert!((st.trace().re - 2.0).abs() < 1e-14);
        }
        assert!(sum.scale_real(2.0 / 3.0).max_diff(&n3_sector_projector()) < 1e-12);
        for j in 0..3 {
            let g = &t.logical[j];
            assert!((linalg::trace_product(g, g).unwrap().re - 1.0).abs() < 1e-12);
            for k in 0..3 {
                if j != k {
                    let o = linalg::trace_product(g, &t.logical[k]).unwrap().re;
                    assert!((o - 0.25).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn akl_examples() {
        let akl = n4_akl();
        for m in akl.a.iter().chain(akl.k.iter()).chain(akl.l.iter()) {
            assert!(m.hermiticity_residual() < 1e-13);
        }
        assert!((&akl.l[0] * &akl.l[0]).max_diff(&CMatrix::identity(16)) < 1e-14);
        let direct = &spinsys::swap(r4(), 1, 2).unwrap() - &spinsys::swap(r4(), 3, 4).unwrap();
        assert!(akl.a[0].max_diff(&direct) < 1e-15);
    }

    #[test]
    fn n4_q_algebra_and_printed_q13() {
        let q = n4_q_operators();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for e in 0..3 {
                        let rhs = if b == c { q[a][e].clone() } else { CMatrix::zeros(16, 16) };
                        assert!((&q[a][b] * &q[c][e]).max_diff(&rhs) < 1e-12);
                    }
                }
                let tr = q[a][b].trace();
                assert!((tr - real(if a == b { 3.0 } else { 0.0 })).norm() < 1e-12);
                assert!(spinsys::collective_commutator_residual(r4(), &q[a][b]).unwrap() < 1e-12);
            }
        }
        let printed = n4_q13_as_printed();
        assert!(printed.max_diff(&q[2][0]) < 1e-14);
        assert!(printed.max_diff(&q[0][2]) > 0.1);
        // printed V₃ = Q₁₂ + Q₂₃ + Q₃₁ pins the sign
        let v = &(&q[0][1] + &q[1][2]) + &q[2][0];
        assert!(v.max_diff(&n4_hws().v3) < 1e-12);
    }

    #[test]
    fn n4_hws_relations() {
        let q = n4_q_operators();
        let id = &(&q[0][0] + &q[1][1]) + &q[2][2];
        let h = n4_hws();
        let w = w3();
        let u_from_q = lin(&[(w, &q[0][0]), (w * w, &q[1][1]), (ONE, &q[2][2])]);
        assert!(h.u3.max_diff(&u_from_q) < 1e-12);
        assert!(h.u3.pow(3).max_diff(&id) < 1e-10);
        assert!(h.v3.pow(3).max_diff(&id) < 1e-10);
        let lhs = &h.u3 * &h.v3;
        let rhs = (&h.v3 * &h.u3).scale(w.conj());
        assert!(lhs.max_diff(&rhs) < 1e-10);
        assert!(n4_u3_as_printed().pow(3).max_diff(&id) > 1.0);
    }

    #[test]
    fn singlet_layer() {
        let l = n4_singlet_layer();
        assert!((&l.proj[0] + &l.proj[1]).max_diff(&l.identity) < 1e-12);
        assert!(l.pauli.algebra_residual(&l.identity) < 1e-10);
        for pr in l.proj.iter().chain(l.cg.iter()) {
            assert!((pr * pr).max_diff(pr) < 1e-12);
            assert!((pr.trace().re - 1.0).abs() < 1e-12);
        }
        assert!((&l.cg[0] + &l.cg[1]).max_diff(&l.identity) < 1e-12);
        let printed = n4_cg_projectors_as_printed();
        assert!(printed[0].max_diff(&l.cg[1]) < 1e-15);
    }

    #[test]
    fn sector_projectors_partition_identity() {
        let [i2, i1, i0] = n4_sector_projectors();
        assert!((i2.trace().re - 5.0).abs() < 1e-12);
        assert!((i1.trace().re - 9.0).abs() < 1e-12);
        assert!((i0.trace().re - 2.0).abs() < 1e-12);
        assert!((&i2 * &i2).max_diff(&i2) < 1e-12);
    }

    #[test]
    fn reduction_constant_is_one_half() {
        let rep = n4_to_n3_reduction().unwrap();
        assert!(rep.consistent);
        assert!((rep.constant.unwrap() - 0.5).abs() < 1e-12);
        let perms: Vec<Vec<usize>> = rep
            .entries
            .iter()
            .map(|e| e.permutation.clone().unwrap().images().to_vec())
            .collect();
        assert_eq!(perms, vec![vec![2, 3, 1], vec![3, 2, 1], vec![1, 2, 3], vec![2, 1, 3]]);
        for e in &rep.entries {
            assert!(e.residual < 1e-10);
        }
    }

    #[test]
    fn cases_by_id() {
        for id in CASE_IDS {
            let case = reference_case(id).unwrap();
            assert!(!case.matrices.is_empty(), "{id}");
        }
        assert_eq!(reference_case("n3-pauli").unwrap().matrices.len(), 3);
        let hws = reference_case("n4-hws").unwrap();
        assert!(hws.get("U3").is_some() && hws.get("V3").is_some());
        let err = reference_case("bogus").unwrap_err().to_string();
        assert!(err.contains("n4-hws"), "{err}");
    }
}
