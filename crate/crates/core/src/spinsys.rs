//! Operators on a register of `n` spin-1/2 constituents.
//!
//! Basis convention: constituent 1 is the leftmost (most significant) tensor
//! factor, and the single-constituent ket `|0⟩` is `m = +1/2`, `|1⟩` is
//! `m = −1/2`. A product ket `|b₁b₂…bₙ⟩` therefore sits at index
//! `Σ b_ℓ 2^{n−ℓ}`.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, real, CMatrix, Complex64, I, ONE, ZERO};

/// A register of `n` spin-1/2 constituents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinRegister {
    n: usize,
}

impl SpinRegister {
    /// Fails unless `2^n` fits under the configured dimension ceiling.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("a register needs at least one constituent".into()));
        }
        if n >= usize::BITS as usize {
            return Err(Error::SizeLimit {
                requested: usize::MAX,
                max: linalg::max_dim(),
            });
        }
        linalg::check_dim(1 << n)?;
        Ok(SpinRegister { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Hilbert space dimension `2^n`.
    #[inline]
    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Bit mask of constituent `site` (1-based) within a basis index.
    #[inline]
    pub(crate) fn mask(&self, site: usize) -> usize {
        1 << (self.n - site)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.n {
            return Err(Error::InvalidArgument(format!(
                "site {site} outside 1..={}",
                self.n
            )));
        }
        Ok(())
    }

    fn check_pair(&self, j: usize, k: usize) -> Result<()> {
        self.check_site(j)?;
        self.check_site(k)?;
        if j == k {
            return Err(Error::InvalidArgument(format!("pair needs distinct sites, got {j} twice")));
        }
        Ok(())
    }

    /// Index of a product ket given as a bit string such as `"0110"`.
    pub fn index_of(&self, label: &str) -> Result<usize> {
        if label.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "ket label {label:?} has length {}, expected {}",
                label.len(),
                self.n
            )));
        }
        label.chars().try_fold(0usize, |acc, ch| match ch {
            '0' => Ok(acc << 1),
            '1' => Ok((acc << 1) | 1),
            _ => Err(Error::InvalidArgument(format!("bad ket label {label:?}"))),
        })
    }

    /// Product ket `|label⟩`.
    pub fn ket(&self, label: &str) -> Result<CMatrix> {
        Ok(CMatrix::basis_ket(self.dim(), self.index_of(label)?))
    }

    /// Bit-string label of a basis index.
    pub fn label_of(&self, index: usize) -> String {
        (1..=self.n)
            .map(|site| if index & self.mask(site) != 0 { '1' } else { '0' })
            .collect()
    }
}

/// Single-constituent operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteOp {
    X,
    Y,
    Z,
    /// Raising operator `|0⟩⟨1|`.
    Plus,
    /// Lowering operator `|1⟩⟨0|`.
    Minus,
}

impl SiteOp {
    /// 2×2 matrix `[[out0←in0, out0←in1], [out1←in0, out1←in1]]`.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            SiteOp::X => [[ZERO, ONE], [ONE, ZERO]],
            SiteOp::Y => [[ZERO, -I], [I, ZERO]],
            SiteOp::Z => [[ONE, ZERO], [ZERO, -ONE]],
            SiteOp::Plus => [[ZERO, ONE], [ZERO, ZERO]],
            SiteOp::Minus => [[ZERO, ZERO], [ONE, ZERO]],
        }
    }

    pub fn as_cmatrix(self) -> CMatrix {
        let m = self.matrix();
        CMatrix::from_rows(&[m[0].to_vec(), m[1].to_vec()])
    }
}

/// Cartesian component label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn site_op(self) -> SiteOp {
        match self {
            Axis::X => SiteOp::X,
            Axis::Y => SiteOp::Y,
            Axis::Z => SiteOp::Z,
        }
    }
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` acting on constituent `site` (1-based).
pub fn sigma(reg: SpinRegister, site: usize, op: SiteOp) -> Result<CMatrix> {
    reg.check_site(site)?;
    let m = op.matrix();
    let mask = reg.mask(site);
    let dim = reg.dim();
    let mut out = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let b_in = usize::from(col & mask != 0);
        for b_out in 0..2 {
            let z = m[b_out][b_in];
            if z != ZERO {
                let row = if b_out == 1 { col | mask } else { col & !mask };
                out[(row, col)] = z;
            }
        }
    }
    Ok(out)
}

/// Applies a single-site operator to a state vector without forming the matrix.
pub fn apply_site(reg: SpinRegister, site: usize, op: SiteOp, v: &CMatrix) -> Result<CMatrix> {
    reg.check_site(site)?;
    if v.rows() != reg.dim() || !v.is_column() {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} on a {}-qubit register",
            v.rows(),
            reg.n
        )));
    }
    let m = op.matrix();
    let mask = reg.mask(site);
    let mut out = CMatrix::zeros(reg.dim(), 1);
    for (col, &amp) in v.data().iter().enumerate() {
        if amp == ZERO {
            continue;
        }
        let b_in = usize::from(col & mask != 0);
        for b_out in 0..2 {
            let z = m[b_out][b_in];
            if z != ZERO {
                let row = if b_out == 1 { col | mask } else { col & !mask };
                out.data_mut()[row] += z * amp;
            }
        }
    }
    Ok(out)
}

/// Collective lowering `J₋·v = Σ_ℓ σ₋^{(ℓ)} v` applied to a state vector.
pub fn apply_j_minus(reg: SpinRegister, v: &CMatrix) -> Result<CMatrix> {
    let mut acc = CMatrix::zeros(reg.dim(), 1);
    for site in 1..=reg.n {
        acc += &apply_site(reg, site, SiteOp::Minus, v)?;
    }
    Ok(acc)
}

/// `J₊·v`.
pub fn apply_j_plus(reg: SpinRegister, v: &CMatrix) -> Result<CMatrix> {
    let mut acc = CMatrix::zeros(reg.dim(), 1);
    for site in 1..=reg.n {
        acc += &apply_site(reg, site, SiteOp::Plus, v)?;
    }
    Ok(acc)
}

/// `Jz·v`.
pub fn apply_jz(reg: SpinRegister, v: &CMatrix) -> Result<CMatrix> {
    if v.rows() != reg.dim() || !v.is_column() {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} on a {}-qubit register",
            v.rows(),
            reg.n
        )));
    }
    let n = reg.n as f64;
    let entries = v
        .data()
        .iter()
        .enumerate()
        .map(|(i, &a)| a * (n / 2.0 - i.count_ones() as f64))
        .collect();
    Ok(CMatrix::column(entries))
}

/// `J²·v`, via `J² = J₋J₊ + Jz² + Jz`.
pub fn apply_j_squared(reg: SpinRegister, v: &CMatrix) -> Result<CMatrix> {
    let mut out = apply_j_minus(reg, &apply_j_plus(reg, v)?)?;
    let jz_v = apply_jz(reg, v)?;
    out += &apply_jz(reg, &jz_v)?;
    out += &jz_v;
    Ok(out)
}

/// Components of the total angular momentum `J = Σ σ^{(ℓ)}/2`.
#[derive(Clone, Debug)]
pub struct TotalJ {
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
    /// `J₋ = Jx − i·Jy`.
    pub j_minus: CMatrix,
    /// `J² = Jx² + Jy² + Jz²`.
    pub j_squared: CMatrix,
}

impl TotalJ {
    pub fn component(&self, axis: Axis) -> &CMatrix {
        match axis {
            Axis::X => &self.jx,
            Axis::Y => &self.jy,
            Axis::Z => &self.jz,
        }
    }
}

pub fn total_j(reg: SpinRegister) -> Result<TotalJ> {
    let dim = reg.dim();
    let mut comps = [
        CMatrix::zeros(dim, dim),
        CMatrix::zeros(dim, dim),
        CMatrix::zeros(dim, dim),
    ];
    for site in 1..=reg.n {
        for (acc, axis) in comps.iter_mut().zip(Axis::ALL) {
            acc.add_scaled(real(0.5), &sigma(reg, site, axis.site_op())?);
        }
    }
    let [jx, jy, jz] = comps;
    let j_minus = &jx - &jy.scale(I);
    let j_squared = &(&(&jx * &jx) + &(&jy * &jy)) + &(&jz * &jz);
    Ok(TotalJ {
        jx,
        jy,
        jz,
        j_minus,
        j_squared,
    })
}

/// `J_a · M` computed from bit flips, without forming `J_a`.
pub fn collective_times(reg: SpinRegister, axis: Axis, m: &CMatrix) -> Result<CMatrix> {
    let dim = reg.dim();
    if m.rows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "operator with {} rows on a {}-qubit register",
            m.rows(),
            reg.n
        )));
    }
    let cols = m.cols();
    let mut out = CMatrix::zeros(dim, cols);
    for row in 0..dim {
        for site in 1..=reg.n {
            let mask = reg.mask(site);
            let bit_set = row & mask != 0;
            let (src, coeff) = match axis {
                Axis::Z => (row, real(if bit_set { -0.5 } else { 0.5 })),
                Axis::X => (row ^ mask, real(0.5)),
                // σ_y|0⟩ = i|1⟩, σ_y|1⟩ = −i|0⟩
                Axis::Y => (row ^ mask, if bit_set { c64(0.0, 0.5) } else { c64(0.0, -0.5) }),
            };
            for c in 0..cols {
                let v = m[(src, c)];
                if v != ZERO {
                    out[(row, c)] += coeff * v;
                }
            }
        }
    }
    Ok(out)
}

/// `max_a ‖[M, J_a]‖_max`, computed without dense `J_a` products.
pub fn collective_commutator_residual(reg: SpinRegister, m: &CMatrix) -> Result<f64> {
    let mut worst = 0.0f64;
    for axis in Axis::ALL {
        let left = collective_times(reg, axis, m)?;
        // M·J_a = (J_a·M†)† since J_a is hermitian
        let right = collective_times(reg, axis, &m.dagger())?.dagger();
        worst = worst.max(left.max_diff(&right));
    }
    Ok(worst)
}

/// A permutation of the constituents `1..=n`, stored as 1-based images.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(images: Vec<usize>) -> Result<Self> {
        Permutation::new(images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.images
    }
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n + 1];
        for &x in &images {
            if x == 0 || x > n || seen[x] {
                return Err(Error::InvalidArgument(format!(
                    "{images:?} is not a permutation of 1..={n}"
                )));
            }
            seen[x] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (1..=n).collect(),
        }
    }

    /// `1 → 2 → … → n → 1`.
    pub fn cyclic(n: usize) -> Self {
        Permutation {
            images: (1..=n).map(|i| i % n + 1).collect(),
        }
    }

    /// Exchange of `j` and `k`.
    pub fn transposition(n: usize, j: usize, k: usize) -> Result<Self> {
        let mut images: Vec<usize> = (1..=n).collect();
        if j == 0 || k == 0 || j > n || k > n || j == k {
            return Err(Error::InvalidArgument(format!("bad transposition ({j} {k}) on {n} sites")));
        }
        images.swap(j - 1, k - 1);
        Ok(Permutation { images })
    }

    /// All `n!` permutations in lexicographic order of their image lists.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (1..=n).collect();
        loop {
            out.push(Permutation {
                images: current.clone(),
            });
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
            current.swap(i, j);
            current[i + 1..].reverse();
        }
        out
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Image of `i` (1-based).
    pub fn image(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation {
            images: other.images.iter().map(|&x| self.images[x - 1]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.images.len()];
        for (i, &x) in self.images.iter().enumerate() {
            images[x - 1] = i + 1;
        }
        Permutation { images }
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, x) in self.images.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "]")
    }
}

/// Unitary that moves the state of constituent `i` to position `p(i)`.
pub fn permutation_operator(reg: SpinRegister, p: &Permutation) -> Result<CMatrix> {
    if p.len() != reg.n {
        return Err(Error::InvalidArgument(format!(
            "permutation of {} sites on a {}-site register",
            p.len(),
            reg.n
        )));
    }
    let dim = reg.dim();
    let mut out = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut row = 0usize;
        for site in 1..=reg.n {
            if col & reg.mask(site) != 0 {
                row |= reg.mask(p.image(site));
            }
        }
        out[(row, col)] = ONE;
    }
    Ok(out)
}

/// Swap `P_{jk}` exchanging constituents `j` and `k`.
pub fn swap(reg: SpinRegister, j: usize, k: usize) -> Result<CMatrix> {
    reg.check_pair(j, k)?;
    permutation_operator(reg, &Permutation::transposition(reg.n, j, k)?)
}

/// `σ⃗^{(j)}·σ⃗^{(k)}`.
pub fn spin_dot(reg: SpinRegister, j: usize, k: usize) -> Result<CMatrix> {
    reg.check_pair(j, k)?;
    let mut acc = CMatrix::zeros(reg.dim(), reg.dim());
    for axis in Axis::ALL {
        let op = axis.site_op();
        acc += &(&sigma(reg, j, op)? * &sigma(reg, k, op)?);
    }
    Ok(acc)
}

/// `(1 + σ⃗^{(j)}·σ⃗^{(k)})/2`, the swap written in terms of spin operators.
pub fn swap_from_spins(reg: SpinRegister, j: usize, k: usize) -> Result<CMatrix> {
    let mut m = spin_dot(reg, j, k)?;
    m += &CMatrix::identity(reg.dim());
    Ok(m.scale_real(0.5))
}

/// Singlet projector `S_{jk} = (1 − P_{jk})/2` on the pair `(j, k)`.
pub fn singlet_projector(reg: SpinRegister, j: usize, k: usize) -> Result<CMatrix> {
    let p = swap(reg, j, k)?;
    Ok((&CMatrix::identity(reg.dim()) - &p).scale_real(0.5))
}

const UNIT_AXIS_TOL: f64 = 1e-12;

fn check_axis(axis: [f64; 3]) -> Result<()> {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_AXIS_TOL {
        return Err(Error::InvalidArgument(format!(
            "rotation axis {axis:?} has norm {norm}, expected 1"
        )));
    }
    Ok(())
}

/// Single-qubit rotation `exp(−i·angle·(axis·σ⃗)/2)` in closed form.
pub fn qubit_rotation(axis: [f64; 3], angle: f64) -> Result<CMatrix> {
    check_axis(axis)?;
    let (s, c) = (angle / 2.0).sin_cos();
    let [x, y, z] = axis;
    Ok(CMatrix::from_rows(&[
        vec![c64(c, -s * z), c64(-s * y, -s * x)],
        vec![c64(s * y, -s * x), c64(c, s * z)],
    ]))
}

/// `exp(−i·angle·(axis·J⃗))` computed from the generator's spectrum.
pub fn collective_rotation(reg: SpinRegister, axis: [f64; 3], angle: f64) -> Result<CMatrix> {
    check_axis(axis)?;
    let j = total_j(reg)?;
    let mut gen = j.jx.scale_real(axis[0]);
    gen.add_scaled(real(axis[1]), &j.jy);
    gen.add_scaled(real(axis[2]), &j.jz);
    linalg::mat_exp_hermitian_generator(&gen, angle)
}

/// `u^{⊗n}`: the same single-qubit unitary on every constituent.
pub fn collective_unitary(reg: SpinRegister, u: &CMatrix) -> Result<CMatrix> {
    if u.shape() != (2, 2) {
        return Err(Error::DimensionMismatch(format!(
            "collective unitary needs a 2x2 factor, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    linalg::kron_power(u, reg.n)
}

/// Haar-random element of SU(2).
///
/// A matrix of independent standard complex Gaussians is orthonormalized
/// column by column (the QR factor with positive diagonal, which is Haar on
/// U(2)) and then divided by a square root of its determinant.
pub fn haar_su2<R: Rng + ?Sized>(rng: &mut R) -> CMatrix {
    let mut g = || c64(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let (a0, a1, b0, b1) = (g(), g(), g(), g());
    // first column
    let n0 = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
    let (q00, q10) = (a0 / n0, a1 / n0);
    // second column, orthogonalized against the first
    let proj = q00.conj() * b0 + q10.conj() * b1;
    let (r0, r1) = (b0 - proj * q00, b1 - proj * q10);
    let n1 = (r0.norm_sqr() + r1.norm_sqr()).sqrt();
    let (q01, q11) = (r0 / n1, r1 / n1);
    let det = q00 * q11 - q01 * q10;
    let phase = det.sqrt();
    CMatrix::from_rows(&[vec![q00 / phase, q01 / phase], vec![q10 / phase, q11 / phase]])
}

/// Uniformly distributed unit 3-vector.
pub fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// `J²` restricted to product kets with exactly `ones` constituents in `|1⟩`
/// (the `m = n/2 − ones` eigenspace of `Jz`), using `J² = n(4−n)/4 + Σ_{a<b} P_ab`.
///
/// Returns the basis indices spanning the block and the block itself.
pub fn j_squared_block(reg: SpinRegister, ones: usize) -> Result<(Vec<usize>, CMatrix)> {
    if ones > reg.n {
        return Err(Error::InvalidArgument(format!(
            "cannot flip {ones} of {} constituents",
            reg.n
        )));
    }
    let indices: Vec<usize> = (0..reg.dim())
        .filter(|i| i.count_ones() as usize == ones)
        .collect();
    let pos: std::collections::HashMap<usize, usize> =
        indices.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let n = reg.n;
    let size = indices.len();
    let offset = (n as f64) * (4.0 - n as f64) / 4.0;
    let mut block = CMatrix::identity(size).scale_real(offset);
    for (k, &idx) in indices.iter().enumerate() {
        for a in 1..=n {
            for b in a + 1..=n {
                let (ma, mb) = (reg.mask(a), reg.mask(b));
                let swapped = if (idx & ma != 0) != (idx & mb != 0) {
                    idx ^ ma ^ mb
                } else {
                    idx
                };
                block[(pos[&swapped], k)] += ONE;
            }
        }
    }
    Ok((indices, block))
}
