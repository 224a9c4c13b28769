//! Exact finite models of `L²[0,1]`.
//!
//! Functions are piecewise polynomials of degree at most two on a uniform
//! grid. On cell `k` of `M` the function is `a + b·t + c·t²` with
//! `t = x - k/M`. Degree two only arises as the image of the Volterra
//! operator, so every inner product below is a closed-form integral of a
//! polynomial of degree at most four and carries no quadrature error.

use std::fmt::Write as _;
use std::ops::Deref;

use crate::ensembles::TriMatrix;
use crate::error::{Error, Result};

/// Largest grid allowed for a common refinement.
pub const MAX_REFINED_CELLS: u128 = 1 << 20;

/// Coordinates in `R^N`, the domain of `W_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordVector(pub Vec<f64>);

impl CoordVector {
    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Deref for CoordVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for CoordVector {
    fn from(v: Vec<f64>) -> Self {
        CoordVector(v)
    }
}

/// Piecewise polynomial on a uniform grid of `cells` subintervals.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    cells: usize,
    coeffs: Vec<[f64; 3]>,
}

fn lcm(a: usize, b: usize) -> u128 {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    let (a, b) = (a as u128, b as u128);
    a / gcd(a, b) * b
}

/// `∫_0^h (p0 + p1 t + ... + p4 t⁴) dt`
fn integrate_poly(p: &[f64; 5], h: f64) -> f64 {
    let mut acc = 0.0;
    let mut hp = h;
    for (k, c) in p.iter().enumerate() {
        acc += c * hp / (k + 1) as f64;
        hp *= h;
    }
    acc
}

fn product(f: &[f64; 3], g: &[f64; 3]) -> [f64; 5] {
    [
        f[0] * g[0],
        f[0] * g[1] + f[1] * g[0],
        f[0] * g[2] + f[1] * g[1] + f[2] * g[0],
        f[1] * g[2] + f[2] * g[1],
        f[2] * g[2],
    ]
}

impl GridFunction {
    /// Builds a function from per-cell `(a, b, c)` triples.
    pub fn new(coeffs: Vec<[f64; 3]>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Dimension { min: 1, got: 0 });
        }
        if coeffs.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("grid function coefficients must be finite".into()));
        }
        Ok(GridFunction { cells: coeffs.len(), coeffs })
    }

    pub fn piecewise_constant(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&a| [a, 0.0, 0.0]).collect())
    }

    pub fn piecewise_linear(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(a, b)| [a, b, 0.0]).collect())
    }

    pub fn zero(cells: usize) -> Result<Self> {
        Self::constant(cells, 0.0)
    }

    pub fn constant(cells: usize, value: f64) -> Result<Self> {
        Self::new(vec![[value, 0.0, 0.0]; cells])
    }

    /// `x ↦ x`.
    pub fn identity(cells: usize) -> Result<Self> {
        let m = cells as f64;
        Self::new((0..cells).map(|k| [k as f64 / m, 1.0, 0.0]).collect())
    }

    /// Piecewise-constant cell averages of a function given through its
    /// antiderivative.
    pub fn cell_averages(cells: usize, antiderivative: impl Fn(f64) -> f64) -> Result<Self> {
        let m = cells as f64;
        let values: Vec<f64> =
            (0..cells).map(|k| (antiderivative((k + 1) as f64 / m) - antiderivative(k as f64 / m)) * m).collect();
        Self::piecewise_constant(&values)
    }

    /// Cell averages of `sin(πx)`.
    pub fn sine(cells: usize) -> Result<Self> {
        use std::f64::consts::PI;
        Self::cell_averages(cells, |x| -(PI * x).cos() / PI)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn coeffs(&self) -> &[[f64; 3]] {
        &self.coeffs
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Highest polynomial degree present on any cell.
    pub fn degree(&self) -> usize {
        if self.coeffs.iter().any(|c| c[2] != 0.0) {
            2
        } else if self.coeffs.iter().any(|c| c[1] != 0.0) {
            1
        } else {
            0
        }
    }

    /// Point evaluation; cell boundaries belong to the right-hand cell,
    /// except `x = 1`.
    pub fn eval(&self, x: f64) -> f64 {
        let m = self.cells as f64;
        let k = ((x * m).floor().max(0.0) as usize).min(self.cells - 1);
        let t = x - k as f64 / m;
        let [a, b, c] = self.coeffs[k];
        a + t * (b + t * c)
    }

    /// Re-expresses the function on a grid `factor` times finer.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("refinement factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let fine = self.cells as u128 * factor as u128;
        if fine > MAX_REFINED_CELLS {
            return Err(Error::RefinementTooLarge(fine));
        }
        let h = 1.0 / fine as f64;
        let mut out = Vec::with_capacity(fine as usize);
        for &[a, b, c] in &self.coeffs {
            for j in 0..factor {
                let s = j as f64 * h;
                out.push([a + s * (b + s * c), b + 2.0 * c * s, c]);
            }
        }
        Ok(GridFunction { cells: fine as usize, coeffs: out })
    }

    /// Both functions on the coarsest common grid.
    fn on_common_grid(&self, other: &Self) -> Result<(Self, Self)> {
        let l = lcm(self.cells, other.cells);
        if l > MAX_REFINED_CELLS {
            return Err(Error::RefinementTooLarge(l));
        }
        let l = l as usize;
        Ok((self.refine(l / self.cells)?, other.refine(l / other.cells)?))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        GridFunction { cells: self.cells, coeffs: self.coeffs.iter().map(|c| c.map(|x| alpha * x)).collect() }
    }

    /// `α·self + β·other` on the common refinement.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        let (f, g) = self.on_common_grid(other)?;
        let coeffs =
            f.coeffs.iter().zip(&g.coeffs).map(|(p, q)| [0, 1, 2].map(|i| alpha * p[i] + beta * q[i])).collect();
        Ok(GridFunction { cells: f.cells, coeffs })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    fn cell_integral(&self, k: usize) -> f64 {
        let h = self.cell_width();
        let [a, b, c] = self.coeffs[k];
        integrate_poly(&[a, b, c, 0.0, 0.0], h)
    }

    /// `∫_0^1 f`.
    pub fn integral(&self) -> f64 {
        (0..self.cells).map(|k| self.cell_integral(k)).sum()
    }

    /// Exact `L²` inner product.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        let (f, g) = self.on_common_grid(other)?;
        let h = f.cell_width();
        Ok(f.coeffs.iter().zip(&g.coeffs).map(|(p, q)| integrate_poly(&product(p, q), h)).sum())
    }

    pub fn norm_squared(&self) -> f64 {
        let h = self.cell_width();
        self.coeffs.iter().map(|p| integrate_poly(&product(p, p), h)).sum::<f64>().max(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// CSV with one row per cell. The `c` column is present only when some
    /// cell carries a quadratic term.
    pub fn to_csv(&self) -> String {
        let quadratic = self.degree() == 2;
        let mut s = String::from(if quadratic { "cell,a,b,c\n" } else { "cell,a,b\n" });
        for (k, [a, b, c]) in self.coeffs.iter().enumerate() {
            if quadratic {
                let _ = writeln!(s, "{k},{a:?},{b:?},{c:?}");
            } else {
                let _ = writeln!(s, "{k},{a:?},{b:?}");
            }
        }
        s
    }

    /// Parses the format written by [`GridFunction::to_csv`]. Lines
    /// starting with `#` are ignored; rows must list cells `0..M` in order.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("grid CSV: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let width = match cols.as_slice() {
            ["cell", "a", "b"] => 3,
            ["cell", "a", "b", "c"] => 4,
            _ => return Err(bad(format!("unexpected header {header:?}"))),
        };
        let mut coeffs = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != width {
                return Err(bad(format!("row {row} has {} fields", fields.len())));
            }
            let idx: usize = fields[0].parse().map_err(|_| bad(format!("row {row}: bad cell index")))?;
            if idx != row {
                return Err(bad(format!("row {row} has cell index {idx}")));
            }
            let mut c = [0.0; 3];
            for (slot, f) in c.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| bad(format!("row {row}: bad number {f:?}")))?;
            }
            coeffs.push(c);
        }
        Self::new(coeffs)
    }
}

/// `W_N v`: the step function with value `√N·v_i` on cell `i`.
pub fn w_embed(v: &CoordVector) -> Result<GridFunction> {
    let root = (v.n() as f64).sqrt();
    GridFunction::piecewise_constant(&v.iter().map(|x| root * x).collect::<Vec<_>>())
}

/// `W_N* f = (⟨f, e_1⟩, …, ⟨f, e_N⟩)`. `n` must divide the grid size.
pub fn w_project(f: &GridFunction, n: usize) -> Result<CoordVector> {
    if n == 0 || !f.cells().is_multiple_of(n) {
        return Err(Error::GridMismatch { cells: f.cells(), n });
    }
    let per = f.cells() / n;
    let root = (n as f64).sqrt();
    Ok(CoordVector((0..n).map(|i| root * (i * per..(i + 1) * per).map(|k| f.cell_integral(k)).sum::<f64>()).collect()))
}

/// `(Vf)(x) = ∫_0^x f`. The input must be piecewise linear at most, so the
/// operator can be applied once per function.
pub fn volterra(f: &GridFunction) -> Result<GridFunction> {
    if f.degree() > 1 {
        return Err(Error::DegreeTooHigh);
    }
    let h = f.cell_width();
    let mut acc = 0.0;
    let coeffs = f
        .coeffs()
        .iter()
        .map(|&[a, b, _]| {
            let cell = [acc, a, b / 2.0];
            acc += a * h + b * h * h / 2.0;
            cell
        })
        .collect();
    GridFunction::new(coeffs)
}

/// Exact `L²` distance `‖f - g‖₂`.
pub fn l2_dist(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    Ok(f.sub(g)?.norm())
}

/// `W_N M W_N* f` for an `N × N` matrix `M`.
pub fn conjugate_action(m: &TriMatrix, f: &GridFunction) -> Result<GridFunction> {
    let u = w_project(f, m.n())?;
    w_embed(&CoordVector(m.mul_vec(&u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::make_t;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn embed_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let f = w_embed(&CoordVector(vec![h, h])).unwrap();
        for [a, b, c] in f.coeffs() {
            assert!(close(*a, 1.0, 1e-15) && *b == 0.0 && *c == 0.0);
        }
        let g = w_embed(&CoordVector(vec![1.0, 0.0, 0.0])).unwrap();
        assert!(close(g.coeffs()[0][0], 3f64.sqrt(), 1e-15));
        assert!(close(g.norm(), 1.0, 1e-14));
    }

    #[test]
    fn project_examples() {
        let one = GridFunction::constant(4, 1.0).unwrap();
        let p = w_project(&one, 4).unwrap();
        for x in p.iter() {
            assert!(close(*x, 0.5, 1e-15));
        }
        let v = CoordVector(vec![0.3, -1.2, 2.0]);
        let back = w_project(&w_embed(&v).unwrap(), 3).unwrap();
        for (a, b) in back.iter().zip(v.iter()) {
            assert!(close(*a, *b, 1e-15));
        }
    }

    #[test]
    fn project_rejects_non_divisor() {
        let f = GridFunction::constant(6, 1.0).unwrap();
        assert!(matches!(w_project(&f, 4), Err(Error::GridMismatch { .. })));
        assert!(w_project(&f, 3).is_ok());
        assert!(w_project(&f, 0).is_err());
    }

    #[test]
    fn volterra_examples() {
        let one = GridFunction::constant(1, 1.0).unwrap();
        let v = volterra(&one).unwrap();
        assert!(close(v.norm(), 1.0 / 3f64.sqrt(), 1e-15));
        assert!(close(v.eval(0.7), 0.7, 1e-15));
        let zero = volterra(&GridFunction::zero(5).unwrap()).unwrap();
        assert_eq!(zero.norm(), 0.0);
        let step = GridFunction::piecewise_constant(&[1.0, 0.0]).unwrap();
        let vs = volterra(&step).unwrap();
        assert_eq!(vs.eval(1.0), 0.5);
        assert_eq!(vs.coeffs()[1], [0.5, 0.0, 0.0]);
    }

    #[test]
    fn volterra_of_linear_is_half_square() {
        let x = GridFunction::identity(8).unwrap();
        let v = volterra(&x).unwrap();
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            assert!(close(v.eval(t), t * t / 2.0, 1e-15));
        }
        assert!(matches!(volterra(&v), Err(Error::DegreeTooHigh)));
    }

    #[test]
    fn distance_examples() {
        let x = GridFunction::identity(3).unwrap();
        assert_eq!(l2_dist(&x, &x).unwrap(), 0.0);
        let z = GridFunction::zero(2).unwrap();
        assert!(close(l2_dist(&x, &z).unwrap(), 1.0 / 3f64.sqrt(), 1e-14));
    }

    #[test]
    fn refinement_preserves_values_and_limits_size() {
        let f = GridFunction::new(vec![[1.0, 2.0, 3.0], [-1.0, 0.5, -2.0]]).unwrap();
        let r = f.refine(3).unwrap();
        for t in [0.01, 0.2, 0.49, 0.51, 0.8, 0.99] {
            assert!(close(f.eval(t), r.eval(t), 1e-13));
        }
        assert!(close(f.norm(), r.norm(), 1e-13));
        let a = GridFunction::zero(1021).unwrap();
        let b = GridFunction::zero(1031).unwrap();
        assert!(matches!(l2_dist(&a, &b), Err(Error::RefinementTooLarge(_))));
    }

    #[test]
    fn conjugate_action_of_t_on_one() {
        // T_2 (1/√2, 1/√2) = (1/(2√2), 2/(2√2)) → steps 1/2, 1.
        let one = GridFunction::constant(2, 1.0).unwrap();
        let g = conjugate_action(&make_t(2).unwrap(), &one).unwrap();
        assert!(close(g.coeffs()[0][0], 0.5, 1e-15));
        assert!(close(g.coeffs()[1][0], 1.0, 1e-15));
        let zero = TriMatrix::zeros(2).unwrap();
        assert_eq!(conjugate_action(&zero, &one).unwrap().norm(), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let f = GridFunction::new(vec![[1.0, 2.0, 0.0], [0.1, -3.5, 0.0]]).unwrap();
        let text = f.to_csv();
        assert!(text.starts_with("cell,a,b\n"));
        assert_eq!(GridFunction::from_csv(&text).unwrap(), f);
        let q = volterra(&f).unwrap();
        assert!(q.to_csv().starts_with("cell,a,b,c\n"));
        assert_eq!(GridFunction::from_csv(&q.to_csv()).unwrap(), q);
        assert!(GridFunction::from_csv("cell,a\n0,1").is_err());
        assert!(GridFunction::from_csv("cell,a,b\n1,1,2\n").is_err());
    }
}
