//! The fifteen academic nonsmooth test problems.
//!
//! Definitions and starting points follow the Lukšan–Vlček collection of
//! nonsmooth test problems. Max-type functions return the gradient of the
//! first piece attaining the maximum, and `sign(0) = 0` inside absolute values.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::oracle::Objective;

/// A registered test problem: oracle, reference optimum, standard start.
#[derive(Clone)]
pub struct ProblemInstance {
    /// Position in the registry, 1 to 15.
    pub index: usize,
    pub name: &'static str,
    pub dimension: usize,
    /// Reference optimal value.
    pub fstar: f64,
    pub x0: Vec<f64>,
    /// A minimizer, where one is known in closed form.
    pub xstar: Option<Vec<f64>>,
    func: Arc<Func>,
}

impl fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("index", &self.index)
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("fstar", &self.fstar)
            .finish_non_exhaustive()
    }
}

impl Objective for ProblemInstance {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.func.evaluate(x, grad)
    }
}

impl ProblemInstance {
    /// `(f(x), g)` with validation of the input.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        if !crate::linalg::all_finite(x) {
            return Err(Error::NonFinite("problem input"));
        }
        let mut g = vec![0.0; self.dimension];
        let f = self.evaluate(x, &mut g);
        Ok((f, g))
    }
}

const NAMES: [&str; 15] = [
    "CB2",
    "CB3",
    "DEM",
    "QL",
    "LQ",
    "Mifflin1",
    "Mifflin2",
    "Rosen-Suzuki",
    "Shor",
    "Maxquad",
    "Maxq",
    "Maxl",
    "Goffin",
    "MxHilb",
    "L1Hilb",
];

/// Registry names in order.
pub fn list_problems() -> &'static [&'static str] {
    &NAMES
}

/// Looks a problem up by name (case-insensitive) or by its index `1..=15`.
pub fn get_problem(key: &str) -> Result<ProblemInstance> {
    let key = key.trim();
    let index = match key.parse::<usize>() {
        Ok(i) if (1..=NAMES.len()).contains(&i) => i,
        _ => NAMES
            .iter()
            .position(|n| {
                n.eq_ignore_ascii_case(key) || n.replace('-', "").eq_ignore_ascii_case(key)
            })
            .map(|i| i + 1)
            .ok_or_else(|| Error::UnknownProblem(key.to_string()))?,
    };
    Ok(build(index))
}

/// All fifteen problems in registry order.
pub fn all_problems() -> Vec<ProblemInstance> {
    (1..=NAMES.len()).map(build).collect()
}

fn build(index: usize) -> ProblemInstance {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let (func, fstar, x0, xstar): (Func, f64, Vec<f64>, Option<Vec<f64>>) = match index {
        1 => (Func::Cb2, 1.952224, vec![1.0, -0.1], None),
        2 => (Func::Cb3, 2.0, vec![2.0, 2.0], Some(vec![1.0, 1.0])),
        3 => (Func::Dem, -3.0, vec![1.0, 1.0], Some(vec![0.0, -3.0])),
        4 => (Func::Ql, 7.2, vec![-1.0, 5.0], Some(vec![1.2, 2.4])),
        5 => (
            Func::Lq,
            -std::f64::consts::SQRT_2,
            vec![-0.5, -0.5],
            Some(vec![s2, s2]),
        ),
        6 => (Func::Mifflin1, -1.0, vec![0.8, 0.6], Some(vec![1.0, 0.0])),
        7 => (Func::Mifflin2, -1.0, vec![-1.0, -1.0], Some(vec![1.0, 0.0])),
        8 => (
            Func::RosenSuzuki,
            -44.0,
            vec![0.0; 4],
            Some(vec![0.0, 1.0, 2.0, -1.0]),
        ),
        9 => (Func::Shor, 22.600162, vec![0.0, 0.0, 0.0, 0.0, 1.0], None),
        10 => (
            Func::Maxquad(MaxquadData::new()),
            -0.841408,
            vec![0.0; 10],
            None,
        ),
        11 => (Func::Maxq, 0.0, alternating_start(20), Some(vec![0.0; 20])),
        12 => (Func::Maxl, 0.0, alternating_start(20), Some(vec![0.0; 20])),
        13 => (
            Func::Goffin,
            0.0,
            (1..=50).map(|i| i as f64 - 25.5).collect(),
            Some(vec![0.0; 50]),
        ),
        14 => (Func::MxHilb, 0.0, vec![1.0; 50], Some(vec![0.0; 50])),
        15 => (Func::L1Hilb, 0.0, vec![1.0; 50], Some(vec![0.0; 50])),
        _ => unreachable!("registry index out of range"),
    };
    ProblemInstance {
        index,
        name: NAMES[index - 1],
        dimension: x0.len(),
        fstar,
        x0,
        xstar,
        func: Arc::new(func),
    }
}

/// `x_i = i` for `i <= n/2`, `x_i = -i` otherwise.
fn alternating_start(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| if i <= n / 2 { i as f64 } else { -(i as f64) })
        .collect()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Index of the first maximal entry.
fn first_max(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Maximum of two-variable pieces `(value, gradient)`.
fn max2(pieces: &[(f64, [f64; 2])], grad: &mut [f64]) -> f64 {
    let values: Vec<f64> = pieces.iter().map(|p| p.0).collect();
    let (f, g) = pieces[first_max(&values)];
    grad.copy_from_slice(&g);
    f
}

const SHOR_A: [[f64; 5]; 10] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [2.0, 1.0, 1.0, 1.0, 3.0],
    [1.0, 2.0, 1.0, 1.0, 2.0],
    [1.0, 4.0, 1.0, 2.0, 2.0],
    [3.0, 2.0, 1.0, 0.0, 1.0],
    [0.0, 2.0, 1.0, 0.0, 1.0],
    [1.0, 1.0, 1.0, 1.0, 1.0],
    [1.0, 0.0, 1.0, 2.0, 1.0],
    [0.0, 0.0, 2.0, 1.0, 0.0],
    [1.0, 1.0, 2.0, 0.0, 0.0],
];

const SHOR_B: [f64; 10] = [1.0, 5.0, 10.0, 2.0, 4.0, 3.0, 1.7, 2.5, 6.0, 3.5];

/// Five quadratics `x^T A_k x - b_k^T x` in ten variables.
struct MaxquadData {
    a: Vec<[[f64; 10]; 10]>,
    b: Vec<[f64; 10]>,
}

impl MaxquadData {
    fn new() -> Self {
        let mut a = Vec::with_capacity(5);
        let mut b = Vec::with_capacity(5);
        for k in 1..=5 {
            let kf = k as f64;
            let mut m = [[0.0; 10]; 10];
            for i in 1..=10 {
                for j in i + 1..=10 {
                    let (fi, fj) = (i as f64, j as f64);
                    let v = (fi / fj).exp() * (fi * fj).cos() * kf.sin();
                    m[i - 1][j - 1] = v;
                    m[j - 1][i - 1] = v;
                }
            }
            for i in 0..10 {
                let off: f64 = (0..10).filter(|&j| j != i).map(|j| m[i][j].abs()).sum();
                m[i][i] = (i + 1) as f64 / 10.0 * kf.sin().abs() + off;
            }
            let mut bk = [0.0; 10];
            for (i, v) in bk.iter_mut().enumerate() {
                let fi = (i + 1) as f64;
                *v = (fi / kf).exp() * (fi * kf).sin();
            }
            a.push(m);
            b.push(bk);
        }
        Self { a, b }
    }
}

fn hilbert_rows(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            x.iter()
                .enumerate()
                .map(|(j, xj)| xj / (i + j + 1) as f64)
                .sum()
        })
        .collect()
}

enum Func {
    Cb2,
    Cb3,
    Dem,
    Ql,
    Lq,
    Mifflin1,
    Mifflin2,
    RosenSuzuki,
    Shor,
    Maxquad(MaxquadData),
    Maxq,
    Maxl,
    Goffin,
    MxHilb,
    L1Hilb,
}

impl Func {
    fn evaluate(&self, x: &[f64], g: &mut [f64]) -> f64 {
        match self {
            Func::Cb2 => {
                let (x1, x2) = (x[0], x[1]);
                let e = 2.0 * (x2 - x1).exp();
                max2(
                    &[
                        (x1 * x1 + x2.powi(4), [2.0 * x1, 4.0 * x2.powi(3)]),
                        (
                            (2.0 - x1).powi(2) + (2.0 - x2).powi(2),
                            [-2.0 * (2.0 - x1), -2.0 * (2.0 - x2)],
                        ),
                        (e, [-e, e]),
                    ],
                    g,
                )
            }
            Func::Cb3 => {
                let (x1, x2) = (x[0], x[1]);
                let e = 2.0 * (x2 - x1).exp();
                max2(
                    &[
                        (x1.powi(4) + x2 * x2, [4.0 * x1.powi(3), 2.0 * x2]),
                        (
                            (2.0 - x1).powi(2) + (2.0 - x2).powi(2),
                            [-2.0 * (2.0 - x1), -2.0 * (2.0 - x2)],
                        ),
                        (e, [-e, e]),
                    ],
                    g,
                )
            }
            Func::Dem => {
                let (x1, x2) = (x[0], x[1]);
                max2(
                    &[
                        (5.0 * x1 + x2, [5.0, 1.0]),
                        (-5.0 * x1 + x2, [-5.0, 1.0]),
                        (x1 * x1 + x2 * x2 + 4.0 * x2, [2.0 * x1, 2.0 * x2 + 4.0]),
                    ],
                    g,
                )
            }
            Func::Ql => {
                let (x1, x2) = (x[0], x[1]);
                let f1 = x1 * x1 + x2 * x2;
                let g1 = [2.0 * x1, 2.0 * x2];
                max2(
                    &[
                        (f1, g1),
                        (
                            f1 + 10.0 * (-4.0 * x1 - x2 + 4.0),
                            [g1[0] - 40.0, g1[1] - 10.0],
                        ),
                        (
                            f1 + 10.0 * (-x1 - 2.0 * x2 + 6.0),
                            [g1[0] - 10.0, g1[1] - 20.0],
                        ),
                    ],
                    g,
                )
            }
            Func::Lq => {
                let (x1, x2) = (x[0], x[1]);
                max2(
                    &[
                        (-x1 - x2, [-1.0, -1.0]),
                        (
                            -x1 - x2 + x1 * x1 + x2 * x2 - 1.0,
                            [-1.0 + 2.0 * x1, -1.0 + 2.0 * x2],
                        ),
                    ],
                    g,
                )
            }
            Func::Mifflin1 => {
                let (x1, x2) = (x[0], x[1]);
                let r = x1 * x1 + x2 * x2 - 1.0;
                max2(
                    &[
                        (-x1, [-1.0, 0.0]),
                        (-x1 + 20.0 * r, [-1.0 + 40.0 * x1, 40.0 * x2]),
                    ],
                    g,
                )
            }
            Func::Mifflin2 => {
                let (x1, x2) = (x[0], x[1]);
                let r = x1 * x1 + x2 * x2 - 1.0;
                let c = 2.0 + 1.75 * sign(r);
                g[0] = -1.0 + 2.0 * c * x1;
                g[1] = 2.0 * c * x2;
                -x1 + 2.0 * r + 1.75 * r.abs()
            }
            Func::RosenSuzuki => {
                let [x1, x2, x3, x4] = [x[0], x[1], x[2], x[3]];
                let f1 =
                    x1 * x1 + x2 * x2 + 2.0 * x3 * x3 + x4 * x4 - 5.0 * x1 - 5.0 * x2 - 21.0 * x3
                        + 7.0 * x4;
                let g1 = [
                    2.0 * x1 - 5.0,
                    2.0 * x2 - 5.0,
                    4.0 * x3 - 21.0,
                    2.0 * x4 + 7.0,
                ];
                let f2 = x1 * x1 + x2 * x2 + x3 * x3 + x4 * x4 + x1 - x2 + x3 - x4 - 8.0;
                let g2 = [
                    2.0 * x1 + 1.0,
                    2.0 * x2 - 1.0,
                    2.0 * x3 + 1.0,
                    2.0 * x4 - 1.0,
                ];
                let f3 = x1 * x1 + 2.0 * x2 * x2 + x3 * x3 + 2.0 * x4 * x4 - x1 - x4 - 10.0;
                let g3 = [2.0 * x1 - 1.0, 4.0 * x2, 2.0 * x3, 4.0 * x4 - 1.0];
                let f4 = 2.0 * x1 * x1 + x2 * x2 + x3 * x3 + 2.0 * x1 - x2 - x4 - 5.0;
                let g4 = [4.0 * x1 + 2.0, 2.0 * x2 - 1.0, 2.0 * x3, -1.0];
                let values = [f1, f1 + 10.0 * f2, f1 + 10.0 * f3, f1 + 10.0 * f4];
                let i = first_max(&values);
                let extra = [None, Some(g2), Some(g3), Some(g4)][i];
                for j in 0..4 {
                    g[j] = g1[j] + extra.map_or(0.0, |e| 10.0 * e[j]);
                }
                values[i]
            }
            Func::Shor => {
                let values: Vec<f64> = SHOR_A
                    .iter()
                    .zip(SHOR_B)
                    .map(|(a, b)| {
                        b * x
                            .iter()
                            .zip(a)
                            .map(|(xj, aj)| (xj - aj).powi(2))
                            .sum::<f64>()
                    })
                    .collect();
                let i = first_max(&values);
                for j in 0..5 {
                    g[j] = 2.0 * SHOR_B[i] * (x[j] - SHOR_A[i][j]);
                }
                values[i]
            }
            Func::Maxquad(d) => {
                let values: Vec<f64> = (0..5)
                    .map(|k| {
                        let a = &d.a[k];
                        let quad: f64 = (0..10)
                            .map(|i| x[i] * (0..10).map(|j| a[i][j] * x[j]).sum::<f64>())
                            .sum();
                        quad - (0..10).map(|i| d.b[k][i] * x[i]).sum::<f64>()
                    })
                    .collect();
                let k = first_max(&values);
                for i in 0..10 {
                    g[i] = 2.0 * (0..10).map(|j| d.a[k][i][j] * x[j]).sum::<f64>() - d.b[k][i];
                }
                values[k]
            }
            Func::Maxq => {
                let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
                let i = first_max(&sq);
                g.fill(0.0);
                g[i] = 2.0 * x[i];
                sq[i]
            }
            Func::Maxl => {
                let ab: Vec<f64> = x.iter().map(|v| v.abs()).collect();
                let i = first_max(&ab);
                g.fill(0.0);
                g[i] = sign(x[i]);
                ab[i]
            }
            Func::Goffin => {
                let n = x.len() as f64;
                let i = first_max(x);
                g.fill(-1.0);
                g[i] += n;
                n * x[i] - x.iter().sum::<f64>()
            }
            Func::MxHilb => {
                let rows = hilbert_rows(x);
                let ab: Vec<f64> = rows.iter().map(|v| v.abs()).collect();
                let i = first_max(&ab);
                let s = sign(rows[i]);
                for (j, gj) in g.iter_mut().enumerate() {
                    *gj = s / (i + j + 1) as f64;
                }
                ab[i]
            }
            Func::L1Hilb => {
                let rows = hilbert_rows(x);
                g.fill(0.0);
                for (i, r) in rows.iter().enumerate() {
                    let s = sign(*r);
                    for (j, gj) in g.iter_mut().enumerate() {
                        *gj += s / (i + j + 1) as f64;
                    }
                }
                rows.iter().map(|v| v.abs()).sum()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn registry_lookup() {
        let p = get_problem("CB2").unwrap();
        assert_eq!((p.dimension, p.fstar), (2, 1.952224));
        let p = get_problem("Shor").unwrap();
        assert_eq!((p.dimension, p.fstar), (5, 22.600162));
        let p = get_problem("maxquad").unwrap();
        assert_eq!((p.dimension, p.fstar), (10, -0.841408));
        assert_eq!(get_problem("8").unwrap().name, "Rosen-Suzuki");
        assert_eq!(get_problem("rosensuzuki").unwrap().index, 8);
        assert!(matches!(get_problem("16"), Err(Error::UnknownProblem(_))));
        assert!(matches!(get_problem("nope"), Err(Error::UnknownProblem(_))));
        assert_eq!(list_problems().len(), 15);
        let dims: Vec<usize> = all_problems().iter().map(|p| p.dimension).collect();
        assert_eq!(dims, [2, 2, 2, 2, 2, 2, 2, 4, 5, 10, 20, 20, 50, 50, 50]);
    }

    #[test]
    fn cb2_at_origin() {
        let (f, g) = get_problem("CB2").unwrap().eval(&[0.0, 0.0]).unwrap();
        assert_eq!(f, 8.0);
        assert_eq!(g, vec![-4.0, -4.0]);
    }

    #[test]
    fn homogeneous_problems_vanish_at_origin() {
        for name in ["Maxq", "Maxl", "Goffin", "MxHilb", "L1Hilb"] {
            let p = get_problem(name).unwrap();
            let (f, g) = p.eval(&vec![0.0; p.dimension]).unwrap();
            assert_eq!(f, 0.0, "{name}");
            assert_eq!(f, p.fstar);
            if name == "Maxq" {
                assert!(g.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn known_minimizers_attain_fstar() {
        for p in all_problems() {
            if let Some(xs) = &p.xstar {
                let (f, _) = p.eval(xs).unwrap();
                assert!(
                    (f - p.fstar).abs() <= 1e-6 * (1.0 + p.fstar.abs()),
                    "{}: {f}",
                    p.name
                );
            }
        }
    }

    #[test]
    fn subgradient_inequality_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in all_problems() {
            let scale = p.x0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for _ in 0..1000 {
                let x: Vec<f64> = (0..p.dimension)
                    .map(|_| rng.gen_range(-scale..scale))
                    .collect();
                let y: Vec<f64> = (0..p.dimension)
                    .map(|_| rng.gen_range(-scale..scale))
                    .collect();
                let (fx, gx) = p.eval(&x).unwrap();
                let (fy, _) = p.eval(&y).unwrap();
                let lin: f64 = gx
                    .iter()
                    .zip(y.iter().zip(&x))
                    .map(|(g, (a, b))| g * (a - b))
                    .sum();
                let tol = 1e-9 * (1.0 + fx.abs() + fy.abs() + lin.abs());
                assert!(fy >= fx + lin - tol, "{}: {fy} < {fx} + {lin}", p.name);
            }
        }
    }

    #[test]
    fn input_validation() {
        let p = get_problem("DEM").unwrap();
        assert!(matches!(
            p.eval(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            p.eval(&[f64::INFINITY, 0.0]),
            Err(Error::NonFinite(_))
        ));
    }
}
