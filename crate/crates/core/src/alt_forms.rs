//! Dense exterior algebra over a real basis of dimension at most 6 with
//! complex coefficients.
//!
//! A form of degree `k` on `R^d` stores one coefficient per strictly
//! increasing index tuple, in lexicographic order. Complex coordinates on
//! `C^n` use the real basis `(x1, y1, ..., xn, yn)`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_DIM: usize = 6;

struct Tables {
    masks: Vec<Vec<Vec<u8>>>,
    rank: Vec<[u8; 64]>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut masks = vec![vec![Vec::new(); MAX_DIM + 1]; MAX_DIM + 1];
        let mut rank = vec![[0u8; 64]; MAX_DIM + 1];
        for (dim, per_dim) in masks.iter_mut().enumerate() {
            for (k, list) in per_dim.iter_mut().enumerate().take(dim + 1) {
                let mut out = Vec::new();
                combos(dim, k, 0, 0, &mut out);
                *list = out;
            }
        }
        for (dim, per_dim) in masks.iter().enumerate() {
            for list in per_dim {
                for (i, &m) in list.iter().enumerate() {
                    rank[dim][m as usize] = i as u8;
                }
            }
        }
        Tables { masks, rank }
    })
}

fn combos(dim: usize, k: usize, start: usize, acc: u8, out: &mut Vec<u8>) {
    if k == 0 {
        out.push(acc);
        return;
    }
    for i in start..dim {
        if dim - i < k {
            break;
        }
        combos(dim, k - 1, i + 1, acc | (1 << i), out);
    }
}

fn slots(dim: usize, degree: usize) -> &'static [u8] {
    &tables().masks[dim][degree]
}

fn rank(dim: usize, mask: u8) -> usize {
    tables().rank[dim][mask as usize] as usize
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Sign of the shuffle `e_A ∧ e_B` for disjoint masks.
fn shuffle_sign(a: u8, b: u8) -> f64 {
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn mask_indices(mask: u8) -> impl Iterator<Item = usize> {
    (0..8).filter(move |i| mask & (1 << i) != 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormVector {
    pub components: Vec<C64>,
}

impl FormVector {
    pub fn new(components: Vec<C64>) -> Self {
        Self { components }
    }

    pub fn real(components: &[f64]) -> Self {
        Self { components: components.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); dim];
        c[i] = C64::new(1.0, 0.0);
        Self { components: c }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingForm {
    dim: usize,
    degree: usize,
    coeffs: Vec<C64>,
}

impl AlternatingForm {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::DimensionMismatch { expected: MAX_DIM, found: dim });
        }
        if degree > dim {
            return Err(Error::DegreeOverflow { degree, dim });
        }
        Ok(Self { dim, degree, coeffs: vec![C64::new(0.0, 0.0); binomial(dim, degree)] })
    }

    pub fn scalar(dim: usize, c: C64) -> Self {
        let mut f = Self::zero(dim, 0).expect("dimension within bounds");
        f.coeffs[0] = c;
        f
    }

    /// Elementary form `dx^{i1} ∧ ... ∧ dx^{ik}`; indices may come in any order.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut f = Self::zero(dim, indices.len())?;
        f.set(indices, C64::new(1.0, 0.0))?;
        Ok(f)
    }

    pub fn one_form(components: &[C64]) -> Self {
        let mut f = Self::zero(components.len(), 1).expect("dimension within bounds");
        f.coeffs.copy_from_slice(components);
        f
    }

    pub fn real_one_form(components: &[f64]) -> Self {
        let c: Vec<C64> = components.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::one_form(&c)
    }

    /// Top-degree form with the given density against `dx^1 ∧ ... ∧ dx^d`.
    pub fn top(dim: usize, c: C64) -> Self {
        let mut f = Self::zero(dim, dim).expect("dimension within bounds");
        f.coeffs[0] = c;
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Index tuples of the stored slots, in storage order.
    pub fn slot_indices(&self) -> Vec<Vec<usize>> {
        slots(self.dim, self.degree).iter().map(|&m| mask_indices(m).collect()).collect()
    }

    fn sorted(indices: &[usize], dim: usize) -> Result<Option<(u8, f64)>> {
        let mut mask = 0u8;
        let mut sign = 1.0;
        for &i in indices {
            if i >= dim {
                return Err(Error::DimensionMismatch { expected: dim, found: i + 1 });
            }
            if mask & (1 << i) != 0 {
                return Ok(None);
            }
            // Moving e_i into sorted position behind the larger indices already placed.
            if (mask >> (i + 1)).count_ones() % 2 == 1 {
                sign = -sign;
            }
            mask |= 1 << i;
        }
        Ok(Some((mask, sign)))
    }

    /// Value on `(e_{i1}, ..., e_{ik})`.
    pub fn coeff(&self, indices: &[usize]) -> Result<C64> {
        if indices.len() != self.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, found: indices.len() });
        }
        Ok(match Self::sorted(indices, self.dim)? {
            None => C64::new(0.0, 0.0),
            Some((m, s)) => self.coeffs[rank(self.dim, m)] * s,
        })
    }

    pub fn set(&mut self, indices: &[usize], value: C64) -> Result<()> {
        if indices.len() != self.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, found: indices.len() });
        }
        match Self::sorted(indices, self.dim)? {
            None => Err(Error::InvalidInput("repeated index".into())),
            Some((m, s)) => {
                self.coeffs[rank(self.dim, m)] = value * s;
                Ok(())
            }
        }
    }

    pub fn top_coefficient(&self) -> C64 {
        if self.degree == self.dim {
            self.coeffs[0]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn conj(&self) -> Self {
        Self { dim: self.dim, degree: self.degree, coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    pub fn re(&self) -> Self {
        Self { dim: self.dim, degree: self.degree, coeffs: self.coeffs.iter().map(|c| C64::new(c.re, 0.0)).collect() }
    }

    pub fn im(&self) -> Self {
        Self { dim: self.dim, degree: self.degree, coeffs: self.coeffs.iter().map(|c| C64::new(c.im, 0.0)).collect() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { dim: self.dim, degree: self.degree, coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, degree: self.degree, coeffs })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if self.degree != other.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, found: other.degree });
        }
        Ok(())
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let degree = self.degree + other.degree;
        let mut out = Self::zero(self.dim, degree)?;
        let sa = slots(self.dim, self.degree);
        let sb = slots(self.dim, other.degree);
        for (i, &ma) in sa.iter().enumerate() {
            let ca = self.coeffs[i];
            if ca == C64::new(0.0, 0.0) {
                continue;
            }
            for (j, &mb) in sb.iter().enumerate() {
                if ma & mb != 0 {
                    continue;
                }
                let cb = other.coeffs[j];
                out.coeffs[rank(self.dim, ma | mb)] += ca * cb * shuffle_sign(ma, mb);
            }
        }
        Ok(out)
    }

    /// `k`-fold wedge power; the zeroth power is the constant 1.
    pub fn power(&self, k: usize) -> Result<Self> {
        let mut acc = Self::scalar(self.dim, C64::new(1.0, 0.0));
        for _ in 0..k {
            acc = acc.wedge(self)?;
        }
        Ok(acc)
    }

    /// Interior product `i_v self`.
    pub fn contract(&self, v: &FormVector) -> Result<Self> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.dim() });
        }
        if self.degree == 0 {
            return Err(Error::DegreeOverflow { degree: 0, dim: self.dim });
        }
        let mut out = Self::zero(self.dim, self.degree - 1)?;
        for (s, &m) in slots(self.dim, self.degree).iter().enumerate() {
            let c = self.coeffs[s];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for (pos, idx) in mask_indices(m).enumerate() {
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                out.coeffs[rank(self.dim, m & !(1 << idx))] += c * v.components[idx] * sign;
            }
        }
        Ok(out)
    }

    /// Full multilinear evaluation `self(v_1, ..., v_k)`.
    pub fn evaluate_on_frame(&self, frame: &[FormVector]) -> Result<C64> {
        if frame.len() != self.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, found: frame.len() });
        }
        for v in frame {
            if v.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: v.dim() });
            }
        }
        let k = self.degree;
        let mut total = C64::new(0.0, 0.0);
        let mut block = vec![C64::new(0.0, 0.0); k * k];
        for (s, &m) in slots(self.dim, k).iter().enumerate() {
            let c = self.coeffs[s];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for (r, idx) in mask_indices(m).enumerate() {
                for (col, v) in frame.iter().enumerate() {
                    block[r * k + col] = v.components[idx];
                }
            }
            total += c * det_complex(&mut block.clone(), k);
        }
        Ok(total)
    }

    /// Real frame convenience wrapper around [`Self::evaluate_on_frame`].
    pub fn evaluate_real(&self, frame: &[Vec<f64>]) -> Result<C64> {
        let f: Vec<FormVector> = frame.iter().map(|v| FormVector::real(v)).collect();
        self.evaluate_on_frame(&f)
    }

    /// Pullback under the linear map with matrix `m` (`self.dim` rows, `new_dim` columns).
    pub fn pullback(&self, m: &[Vec<f64>], new_dim: usize) -> Result<Self> {
        if m.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: m.len() });
        }
        let k = self.degree;
        let mut out = Self::zero(new_dim, k)?;
        let old = slots(self.dim, k);
        let mut block = vec![C64::new(0.0, 0.0); k * k];
        for (t, &mt) in slots(new_dim, k).iter().enumerate() {
            let cols: Vec<usize> = mask_indices(mt).collect();
            let mut acc = C64::new(0.0, 0.0);
            for (s, &ms) in old.iter().enumerate() {
                let c = self.coeffs[s];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for (r, row) in mask_indices(ms).enumerate() {
                    for (ci, &col) in cols.iter().enumerate() {
                        block[r * k + ci] = C64::new(m[row][col], 0.0);
                    }
                }
                acc += c * det_complex(&mut block.clone(), k);
            }
            out.coeffs[t] = acc;
        }
        Ok(out)
    }

    /// Restriction to the span of `frame`, expressed in frame coordinates.
    pub fn restrict(&self, frame: &[Vec<f64>]) -> Result<Self> {
        let m: Vec<Vec<f64>> = (0..self.dim).map(|i| frame.iter().map(|v| v[i]).collect()).collect();
        self.pullback(&m, frame.len())
    }

    /// Inverse of [`Self::restrict`] for an orthonormal frame: the ambient form
    /// that agrees with `self` on the frame span and kills its complement.
    pub fn embed(&self, frame: &[Vec<f64>], ambient_dim: usize) -> Result<Self> {
        if frame.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: frame.len() });
        }
        self.pullback(frame, ambient_dim)
    }
}

/// Scalar `c` with `top = c * reference`.
pub fn density_ratio(top: &AlternatingForm, reference: &AlternatingForm) -> Result<C64> {
    if top.dim != reference.dim {
        return Err(Error::DimensionMismatch { expected: reference.dim, found: top.dim });
    }
    if top.degree != top.dim || reference.degree != reference.dim {
        return Err(Error::DegreeOverflow { degree: top.degree.min(reference.degree), dim: top.dim });
    }
    let r = reference.coeffs[0];
    if r.norm() == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(top.coeffs[0] / r)
}

/// Determinant of a `k x k` row-major complex matrix; destroys its input.
pub fn det_complex(a: &mut [C64], k: usize) -> C64 {
    let mut det = C64::new(1.0, 0.0);
    for col in 0..k {
        let mut piv = col;
        let mut best = a[col * k + col].norm();
        for r in col + 1..k {
            let v = a[r * k + col].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != col {
            for c in 0..k {
                a.swap(col * k + c, piv * k + c);
            }
            det = -det;
        }
        let d = a[col * k + col];
        det *= d;
        for r in col + 1..k {
            let factor = a[r * k + col] / d;
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            for c in col..k {
                let v = a[col * k + c];
                a[r * k + c] -= factor * v;
            }
        }
    }
    det
}

impl Add for &AlternatingForm {
    type Output = AlternatingForm;
    fn add(self, rhs: &AlternatingForm) -> AlternatingForm {
        self.try_add(rhs).expect("forms of equal shape")
    }
}

impl Add for AlternatingForm {
    type Output = AlternatingForm;
    fn add(self, rhs: AlternatingForm) -> AlternatingForm {
        &self + &rhs
    }
}

impl Sub for &AlternatingForm {
    type Output = AlternatingForm;
    fn sub(self, rhs: &AlternatingForm) -> AlternatingForm {
        self.try_add(&(-rhs)).expect("forms of equal shape")
    }
}

impl Sub for AlternatingForm {
    type Output = AlternatingForm;
    fn sub(self, rhs: AlternatingForm) -> AlternatingForm {
        &self - &rhs
    }
}

impl Neg for &AlternatingForm {
    type Output = AlternatingForm;
    fn neg(self) -> AlternatingForm {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Neg for AlternatingForm {
    type Output = AlternatingForm;
    fn neg(self) -> AlternatingForm {
        -&self
    }
}

impl Mul<C64> for &AlternatingForm {
    type Output = AlternatingForm;
    fn mul(self, rhs: C64) -> AlternatingForm {
        self.scale(rhs)
    }
}

impl Mul<f64> for &AlternatingForm {
    type Output = AlternatingForm;
    fn mul(self, rhs: f64) -> AlternatingForm {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Mul<f64> for AlternatingForm {
    type Output = AlternatingForm;
    fn mul(self, rhs: f64) -> AlternatingForm {
        self.scale(C64::new(rhs, 0.0))
    }
}

// Complex coordinates on C^n over the real basis (x1, y1, ..., xn, yn).

pub fn dz(n: usize, a: usize) -> AlternatingForm {
    let mut c = vec![C64::new(0.0, 0.0); 2 * n];
    c[2 * a] = C64::new(1.0, 0.0);
    c[2 * a + 1] = C64::new(0.0, 1.0);
    AlternatingForm::one_form(&c)
}

pub fn dzbar(n: usize, a: usize) -> AlternatingForm {
    dz(n, a).conj()
}

/// `c_n = 2^{-n} i^{n^2}`.
pub fn c_n(n: usize) -> C64 {
    let phase = match (n * n) % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    phase * 0.5f64.powi(n as i32)
}

/// `dx1 ∧ dy1 ∧ ... ∧ dxn ∧ dyn` on `R^dim`.
pub fn standard_volume(dim: usize) -> AlternatingForm {
    AlternatingForm::top(dim, C64::new(1.0, 0.0))
}

/// `Ψ = dz1 ∧ ... ∧ dzn`.
pub fn holomorphic_volume(n: usize) -> AlternatingForm {
    let mut acc = AlternatingForm::scalar(2 * n, C64::new(1.0, 0.0));
    for a in 0..n {
        acc = acc.wedge(&dz(n, a)).expect("degree within bounds");
    }
    acc
}

/// Multiplication by `i` on `R^{2n}`: `J e_x = e_y`, `J e_y = -e_x`.
pub fn complex_structure(n: usize) -> Vec<Vec<f64>> {
    let mut j = vec![vec![0.0; 2 * n]; 2 * n];
    for a in 0..n {
        j[2 * a + 1][2 * a] = 1.0;
        j[2 * a][2 * a + 1] = -1.0;
    }
    j
}

pub fn apply_j(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for a in 0..x.len() / 2 {
        out[2 * a] = -x[2 * a + 1];
        out[2 * a + 1] = x[2 * a];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_form(rng: &mut ChaCha8Rng, dim: usize, degree: usize) -> AlternatingForm {
        let mut f = AlternatingForm::zero(dim, degree).unwrap();
        for x in f.coeffs.iter_mut() {
            *x = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        f
    }

    fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> FormVector {
        FormVector::new((0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
    }

    fn close(a: &AlternatingForm, b: &AlternatingForm, tol: f64) -> bool {
        let scale = 1.0 + a.norm().max(b.norm());
        (a - b).norm() <= tol * scale
    }

    fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
        if k == 0 {
            return vec![(vec![], 1.0)];
        }
        let mut out = Vec::new();
        for (p, s) in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                let sign = if (p.len() - pos) % 2 == 0 { s } else { -s };
                out.push((q, sign));
            }
        }
        out
    }

    // Leibniz-formula evaluation used as an independent oracle.
    fn brute_evaluate(a: &AlternatingForm, frame: &[FormVector]) -> C64 {
        let k = a.degree();
        let mut total = C64::new(0.0, 0.0);
        for idx in a.slot_indices() {
            let coeff = a.coeff(&idx).unwrap();
            for (perm, sign) in permutations(k) {
                let mut prod = C64::new(sign, 0.0);
                for (slot, &p) in perm.iter().enumerate() {
                    prod *= frame[slot].components[idx[p]];
                }
                total += coeff * prod;
            }
        }
        total
    }

    #[test]
    fn basis_wedge() {
        let a = AlternatingForm::basis(4, &[0]).unwrap();
        let b = AlternatingForm::basis(4, &[1]).unwrap();
        let w = a.wedge(&b).unwrap();
        assert_eq!(w.coeff(&[0, 1]).unwrap(), c(1.0));
        assert_eq!(w.coeff(&[1, 0]).unwrap(), c(-1.0));
        assert_eq!(b.wedge(&a).unwrap().coeff(&[0, 1]).unwrap(), c(-1.0));
    }

    #[test]
    fn odd_form_squares_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 2..=6 {
            let a = random_form(&mut rng, dim, 1);
            assert!(a.wedge(&a).unwrap().norm() < 1e-14);
        }
        let a = random_form(&mut rng, 6, 3);
        assert!(a.wedge(&a).unwrap().norm() < 1e-13);
    }

    #[test]
    fn degree_overflow_and_mismatch() {
        let a = AlternatingForm::basis(4, &[0, 1, 2]).unwrap();
        assert!(matches!(a.wedge(&a), Err(Error::DegreeOverflow { .. })));
        let b = AlternatingForm::basis(5, &[0]).unwrap();
        assert!(matches!(a.wedge(&b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(a.contract(&FormVector::basis(5, 0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn contraction_basics() {
        let w = AlternatingForm::basis(3, &[0, 1]).unwrap();
        let i = w.contract(&FormVector::basis(3, 0)).unwrap();
        assert_eq!(i, AlternatingForm::basis(3, &[1]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_form(&mut rng, 5, 3);
        let v = random_vector(&mut rng, 5);
        assert!(a.contract(&v).unwrap().contract(&v).unwrap().norm() < 1e-14);
    }

    #[test]
    fn top_form_on_standard_basis() {
        let t = AlternatingForm::top(4, C64::new(2.5, -1.0));
        let frame: Vec<FormVector> = (0..4).map(|i| FormVector::basis(4, i)).collect();
        assert_eq!(t.evaluate_on_frame(&frame).unwrap(), C64::new(2.5, -1.0));
        let mut dep = frame.clone();
        dep[3] = dep[1].clone();
        assert_eq!(t.evaluate_on_frame(&dep).unwrap(), c(0.0));
    }

    #[test]
    fn complex_volume_is_standard() {
        for n in 1..=3 {
            let psi = holomorphic_volume(n);
            let mu = psi.wedge(&psi.conj()).unwrap().scale(c_n(n));
            let frame: Vec<FormVector> = (0..2 * n).map(|i| FormVector::basis(2 * n, i)).collect();
            let val = mu.evaluate_on_frame(&frame).unwrap();
            assert!((val - c(1.0)).norm() < 1e-14, "n = {n}: {val}");
        }
    }

    #[test]
    fn density_ratio_cases() {
        let mu = standard_volume(4);
        assert_eq!(density_ratio(&(&mu * 2.0), &mu).unwrap(), c(2.0));
        let z = AlternatingForm::zero(4, 4).unwrap();
        assert_eq!(density_ratio(&mu, &z), Err(Error::ZeroReference));
    }

    #[test]
    fn contact_form_on_s3_point() {
        let p = [0.3f64, -0.4, 0.5, (1.0f64 - 0.09 - 0.16 - 0.25).sqrt()];
        // θ = Σ (x dy − y dx), dθ = 2 Σ dx ∧ dy.
        let theta = AlternatingForm::real_one_form(&[-p[1], p[0], -p[3], p[2]]);
        let dtheta =
            &(&AlternatingForm::basis(4, &[0, 1]).unwrap() + &AlternatingForm::basis(4, &[2, 3]).unwrap()) * 2.0;
        let top = theta.wedge(&dtheta).unwrap();
        let frame = orthonormal_tangent(&p);
        let vol = standard_volume(4).contract(&FormVector::real(&p)).unwrap();
        let ratio = top.evaluate_real(&frame).unwrap() / vol.evaluate_real(&frame).unwrap();
        assert!((ratio - c(2.0)).norm() < 1e-13);
        assert!((vol.evaluate_real(&frame).unwrap().norm() - 1.0).abs() < 1e-13);
    }

    fn orthonormal_tangent(p: &[f64]) -> Vec<Vec<f64>> {
        let d = p.len();
        let mut basis: Vec<Vec<f64>> = vec![p.to_vec()];
        for i in 0..d {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 && basis.len() < d {
                basis.push(v.iter().map(|x| x / n).collect());
            }
        }
        basis.remove(0);
        basis
    }

    #[test]
    fn pullback_matches_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_form(&mut rng, 5, 2);
        let m: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let pb = a.pullback(&m, 3).unwrap();
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mu: Vec<f64> = (0..5).map(|i| (0..3).map(|j| m[i][j] * u[j]).sum()).collect();
        let mw: Vec<f64> = (0..5).map(|i| (0..3).map(|j| m[i][j] * w[j]).sum()).collect();
        let lhs = pb.evaluate_real(&[u, w]).unwrap();
        let rhs = a.evaluate_real(&[mu, mw]).unwrap();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn algebra_identities_many_seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for dim in 4..=6 {
            for _ in 0..100 {
                let da = rng.random_range(0..=2usize);
                let db = rng.random_range(0..=2usize);
                let dc = rng.random_range(0..=dim - da - db);
                let a = random_form(&mut rng, dim, da);
                let b = random_form(&mut rng, dim, db);
                let cc = random_form(&mut rng, dim, dc);
                let left = a.wedge(&b).unwrap().wedge(&cc).unwrap();
                let right = a.wedge(&b.wedge(&cc).unwrap()).unwrap();
                assert!(close(&left, &right, 1e-12));
                let sign = if (da * db) % 2 == 0 { 1.0 } else { -1.0 };
                assert!(close(&a.wedge(&b).unwrap(), &(&b.wedge(&a).unwrap() * sign), 1e-12));
                if da + db >= 1 {
                    let v = random_vector(&mut rng, dim);
                    let lhs = a.wedge(&b).unwrap().contract(&v).unwrap();
                    let s = if da % 2 == 0 { 1.0 } else { -1.0 };
                    let t1 = if da > 0 { Some(a.contract(&v).unwrap().wedge(&b).unwrap()) } else { None };
                    let t2 = if db > 0 { Some(&a.wedge(&b.contract(&v).unwrap()).unwrap() * s) } else { None };
                    let rhs = match (t1, t2) {
                        (Some(x), Some(y)) => &x + &y,
                        (Some(x), None) => x,
                        (None, Some(y)) => y,
                        (None, None) => unreachable!(),
                    };
                    assert!(close(&lhs, &rhs, 1e-12));
                }
            }
        }
    }

    #[test]
    fn wedge_evaluation_matches_permutation_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for dim in 4..=6 {
            for _ in 0..20 {
                let a = random_form(&mut rng, dim, 1);
                let b = random_form(&mut rng, dim, 2);
                let w = a.wedge(&b).unwrap();
                let frame: Vec<FormVector> = (0..3).map(|_| random_vector(&mut rng, dim)).collect();
                let fast = w.evaluate_on_frame(&frame).unwrap();
                let slow = brute_evaluate(&w, &frame);
                assert!((fast - slow).norm() <= 1e-12 * (1.0 + slow.norm()));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn graded_commutativity(seed in any::<u64>(), dim in 2usize..=6, da in 0usize..=3, db in 0usize..=3) {
            prop_assume!(da + db <= dim);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_form(&mut rng, dim, da);
            let b = random_form(&mut rng, dim, db);
            let sign = if (da * db) % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!(close(&a.wedge(&b).unwrap(), &(&b.wedge(&a).unwrap() * sign), 1e-12));
        }

        #[test]
        fn permuted_coefficients_carry_sign(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_form(&mut rng, 6, 3);
            let v = a.coeff(&[1, 3, 4]).unwrap();
            prop_assert_eq!(a.coeff(&[3, 1, 4]).unwrap(), -v);
            prop_assert_eq!(a.coeff(&[4, 1, 3]).unwrap(), v);
            prop_assert_eq!(a.coeff(&[1, 1, 4]).unwrap(), C64::new(0.0, 0.0));
        }
    }
}
