//! Per-example smooth losses, the averaged empirical risk and the uniform
//! smoothness constant of each loss family.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Floor used for the smoothness constant of degenerate (all-zero) feature
/// matrices so that step-size and regularization schedules stay finite.
pub const SMOOTHNESS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `g_i(w) = (y_i - <w, x_i>)^2`
    LeastSquares,
    /// `g_i(w) = ln(1 + exp(-y_i <w, x_i>))` with `y_i` in `{-1, +1}`
    Logistic,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::LeastSquares => "ls",
            LossKind::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" | "least_squares" | "least-squares" => Ok(LossKind::LeastSquares),
            "logistic" | "logreg" => Ok(LossKind::Logistic),
            other => Err(Error::InvalidConfig(format!("unknown loss kind `{other}`"))),
        }
    }
}

/// Feature matrix (one example per row) and label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Array1<f64>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::InvalidDataset("zero feature columns".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {} rows",
                labels.len(),
                n
            )));
        }
        if !features.iter().chain(labels.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Dataset { features, labels })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    fn check_labels(&self, kind: LossKind) -> Result<()> {
        if kind == LossKind::Logistic && self.labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidDataset(
                "logistic labels must be exactly -1 or +1".into(),
            ));
        }
        Ok(())
    }

    /// Reads a dataset in the `y,x1,...,xd` CSV layout.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || headers.get(0).map(str::trim) != Some("y") {
            return Err(Error::InvalidDataset(
                "expected header `y,x1,...,xd`".into(),
            ));
        }
        let d = headers.len() - 1;
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != d + 1 {
                return Err(Error::InvalidDataset(format!(
                    "row {} has {} fields, expected {}",
                    row + 1,
                    record.len(),
                    d + 1
                )));
            }
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidDataset(format!("row {}: cannot parse `{field}`", row + 1))
                })?;
                if col == 0 {
                    labels.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        let n = labels.len();
        let features = Array2::from_shape_vec((n, d), values)
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        Dataset::new(features, Array1::from(labels))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.d()).map(|j| format!("x{j}")));
        wtr.write_record(&header)?;
        for (i, row) in self.features.rows().into_iter().enumerate() {
            let mut rec = Vec::with_capacity(self.d() + 1);
            // `{:?}` prints the shortest representation that round-trips.
            rec.push(format!("{:?}", self.labels[i]));
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A dataset, a loss family and the domain radius `R`; defines the objective
/// `G(w) = (1/n) sum_i g_i(w)` over the ball of radius `R`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    dataset: Dataset,
    loss_kind: LossKind,
    domain_radius: f64,
    smoothness: f64,
}

impl ProblemInstance {
    pub fn new(dataset: Dataset, loss_kind: LossKind, domain_radius: f64) -> Result<Self> {
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "domain radius must be positive, got {domain_radius}"
            )));
        }
        dataset.check_labels(loss_kind)?;
        let smoothness = smoothness_constant(&dataset, loss_kind)?;
        Ok(ProblemInstance {
            dataset,
            loss_kind,
            domain_radius,
            smoothness,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn d(&self) -> usize {
        self.dataset.d()
    }

    pub(crate) fn check_dim(&self, w: &ArrayView1<f64>) -> Result<()> {
        if w.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: w.len(),
            });
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    /// Value of the `i`-th loss at `w`.
    pub fn loss_value(&self, i: usize, w: ArrayView1<f64>) -> Result<f64> {
        self.check_index(i)?;
        self.check_dim(&w)?;
        Ok(self.loss_value_unchecked(i, w))
    }

    /// Gradient of the `i`-th loss at `w`.
    pub fn loss_grad(&self, i: usize, w: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_index(i)?;
        self.check_dim(&w)?;
        let mut out = Array1::zeros(self.d());
        self.add_loss_grad(i, w, 1.0, &mut out);
        Ok(out)
    }

    /// `G(w)`, summed left to right over the examples.
    pub fn full_objective(&self, w: ArrayView1<f64>) -> Result<f64> {
        self.check_dim(&w)?;
        let mut sum = 0.0;
        for i in 0..self.n() {
            sum += self.loss_value_unchecked(i, w);
        }
        Ok(sum / self.n() as f64)
    }

    /// `grad G(w)` without any oracle accounting, summed left to right.
    pub fn full_gradient(&self, w: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim(&w)?;
        let mut out = Array1::zeros(self.d());
        for i in 0..self.n() {
            self.add_loss_grad(i, w, 1.0, &mut out);
        }
        out /= self.n() as f64;
        Ok(out)
    }

    pub(crate) fn loss_value_unchecked(&self, i: usize, w: ArrayView1<f64>) -> f64 {
        let x = self.dataset.row(i);
        let y = self.dataset.labels[i];
        let z = x.dot(&w);
        match self.loss_kind {
            LossKind::LeastSquares => {
                let r = y - z;
                r * r
            }
            LossKind::Logistic => softplus(-y * z),
        }
    }

    /// Every per-example gradient is a multiple of its feature row:
    /// `grad g_i(w) = c_i(w) x_i`. Returns `c_i(w)`.
    pub(crate) fn grad_coef(&self, i: usize, w: ArrayView1<f64>) -> f64 {
        let x = self.dataset.row(i);
        let y = self.dataset.labels[i];
        let z = x.dot(&w);
        match self.loss_kind {
            LossKind::LeastSquares => -2.0 * (y - z),
            LossKind::Logistic => -y * sigmoid(-y * z),
        }
    }

    /// `out += scale * grad g_i(w)`.
    pub(crate) fn add_loss_grad(
        &self,
        i: usize,
        w: ArrayView1<f64>,
        scale: f64,
        out: &mut Array1<f64>,
    ) {
        let coef = self.grad_coef(i, w);
        out.scaled_add(scale * coef, &self.dataset.row(i));
    }
}

/// `ln(1 + exp(u))` without overflow for large positive `u`.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Uniform per-example smoothness constant: `2 max ||x_i||^2` for least
/// squares and `max ||x_i||^2 / 4` for logistic loss, floored at
/// [`SMOOTHNESS_FLOOR`].
pub fn smoothness_constant(dataset: &Dataset, loss_kind: LossKind) -> Result<f64> {
    if dataset.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let max_sq = dataset
        .features
        .rows()
        .into_iter()
        .map(|x| x.dot(&x))
        .fold(0.0_f64, f64::max);
    let beta = match loss_kind {
        LossKind::LeastSquares => 2.0 * max_sq,
        LossKind::Logistic => 0.25 * max_sq,
    };
    Ok(beta.max(SMOOTHNESS_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(x: Array2<f64>, y: Array1<f64>, kind: LossKind) -> ProblemInstance {
        ProblemInstance::new(Dataset::new(x, y).unwrap(), kind, 1.0).unwrap()
    }

    fn random_instance(kind: LossKind, seed: u64) -> ProblemInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d) = (8, 4);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.5..1.5));
        let y = Array1::from_shape_fn(n, |_| match kind {
            LossKind::LeastSquares => rng.random_range(-2.0..2.0),
            LossKind::Logistic => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        });
        ProblemInstance::new(Dataset::new(x, y).unwrap(), kind, 2.0).unwrap()
    }

    fn random_in_ball(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Array1<f64> {
        let v: Array1<f64> = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
        let norm = v.dot(&v).sqrt();
        v * (r * rng.random::<f64>() / norm)
    }

    #[test]
    fn least_squares_values() {
        let p = instance(array![[1.0, 0.0]], array![1.0], LossKind::LeastSquares);
        assert_eq!(p.loss_value(0, array![0.0, 0.0].view()).unwrap(), 1.0);
        let p = instance(array![[2.0, 1.0]], array![3.0], LossKind::LeastSquares);
        assert_eq!(p.loss_value(0, array![1.0, 1.0].view()).unwrap(), 0.0);
    }

    #[test]
    fn logistic_value_at_origin_is_ln2() {
        let p = instance(array![[0.3, -7.0]], array![1.0], LossKind::Logistic);
        let v = p.loss_value(0, array![0.0, 0.0].view()).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_is_finite_for_huge_margins() {
        let p = instance(array![[1.0]], array![-1.0], LossKind::Logistic);
        let v = p.loss_value(0, array![800.0].view()).unwrap();
        assert!((v - 800.0).abs() < 1e-9);
        let v = p.loss_value(0, array![-800.0].view()).unwrap();
        assert!((0.0..1e-300).contains(&v));
        let g = p.loss_grad(0, array![800.0].view()).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let p = instance(array![[1.0, 0.0]], array![1.0], LossKind::LeastSquares);
        assert_eq!(p.loss_grad(0, array![0.0, 0.0].view()).unwrap(), array![-2.0, 0.0]);
        let p = instance(array![[1.0, 2.0]], array![1.0], LossKind::Logistic);
        assert_eq!(p.loss_grad(0, array![0.0, 0.0].view()).unwrap(), array![-0.5, -1.0]);
        // zero residual is a minimizer
        let p = instance(array![[2.0, 1.0]], array![3.0], LossKind::LeastSquares);
        assert_eq!(p.loss_grad(0, array![1.0, 1.0].view()).unwrap(), array![0.0, 0.0]);
    }

    #[test]
    fn full_objective_averages() {
        let p = instance(array![[1.0, 2.0]], array![0.5], LossKind::LeastSquares);
        let w = array![0.2, -0.1];
        assert_eq!(
            p.full_objective(w.view()).unwrap(),
            p.loss_value(0, w.view()).unwrap()
        );
        let p = instance(
            array![[1.0, 2.0], [1.0, 2.0]],
            array![0.5, 0.5],
            LossKind::LeastSquares,
        );
        assert_eq!(
            p.full_objective(w.view()).unwrap(),
            p.loss_value(1, w.view()).unwrap()
        );
        // residuals 1, 2, 1 at w = 0
        let p = instance(
            array![[1.0], [1.0], [1.0]],
            array![1.0, -2.0, 1.0],
            LossKind::LeastSquares,
        );
        assert_eq!(p.full_objective(array![0.0].view()).unwrap(), 2.0);
    }

    #[test]
    fn smoothness_constants() {
        let ds = Dataset::new(array![[1.0, 0.0]], array![1.0]).unwrap();
        assert_eq!(smoothness_constant(&ds, LossKind::LeastSquares).unwrap(), 2.0);
        let ds = Dataset::new(array![[2.0, 0.0]], array![1.0]).unwrap();
        assert_eq!(smoothness_constant(&ds, LossKind::Logistic).unwrap(), 1.0);
        let ds = Dataset::new(Array2::zeros((3, 2)), array![1.0, -1.0, 1.0]).unwrap();
        assert_eq!(smoothness_constant(&ds, LossKind::LeastSquares).unwrap(), SMOOTHNESS_FLOOR);
        assert_eq!(smoothness_constant(&ds, LossKind::Logistic).unwrap(), SMOOTHNESS_FLOOR);
    }

    #[test]
    fn smoothness_matches_top_hessian_eigenvalue() {
        // Power iteration on the least-squares Hessian 2 x x^T.
        let x: Array1<f64> = array![1.0, 0.0];
        let hess = Array2::from_shape_fn((2, 2), |(a, b)| 2.0 * x[a] * x[b]);
        let mut v: Array1<f64> = array![0.6, 0.8];
        let mut eig = 0.0;
        for _ in 0..50 {
            let hv = hess.dot(&v);
            eig = v.dot(&hv);
            let norm = hv.dot(&hv).sqrt();
            v = hv / norm;
        }
        let ds = Dataset::new(array![[1.0, 0.0]], array![1.0]).unwrap();
        assert!((eig - smoothness_constant(&ds, LossKind::LeastSquares).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = instance(array![[1.0, 0.0]], array![1.0], LossKind::LeastSquares);
        assert!(matches!(
            p.loss_value(1, array![0.0, 0.0].view()),
            Err(Error::IndexOutOfRange { index: 1, n: 1 })
        ));
        assert!(matches!(
            p.loss_grad(0, array![0.0].view()),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(Dataset::new(Array2::zeros((0, 2)), Array1::zeros(0)).is_err());
        assert!(Dataset::new(array![[f64::NAN]], array![1.0]).is_err());
        let ds = Dataset::new(array![[1.0]], array![0.5]).unwrap();
        assert!(ProblemInstance::new(ds.clone(), LossKind::Logistic, 1.0).is_err());
        assert!(ProblemInstance::new(ds, LossKind::LeastSquares, 0.0).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-6;
        for (kind, seed) in [(LossKind::LeastSquares, 1), (LossKind::Logistic, 2)] {
            let p = random_instance(kind, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            for _ in 0..100 {
                let i = rng.random_range(0..p.n());
                let w = random_in_ball(&mut rng, p.d(), 2.0);
                let g = p.loss_grad(i, w.view()).unwrap();
                for j in 0..p.d() {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[j] += h;
                    wm[j] -= h;
                    let fd = (p.loss_value(i, wp.view()).unwrap()
                        - p.loss_value(i, wm.view()).unwrap())
                        / (2.0 * h);
                    let rel = (fd - g[j]).abs() / g[j].abs().max(1.0);
                    assert!(rel <= 1e-5, "{kind:?} i={i} j={j}: fd={fd} grad={}", g[j]);
                }
            }
        }
    }

    #[test]
    fn smoothness_lipschitz_and_convexity_witnesses() {
        for (kind, seed) in [(LossKind::LeastSquares, 3), (LossKind::Logistic, 4)] {
            let p = random_instance(kind, seed);
            let beta = p.smoothness();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let i = rng.random_range(0..p.n());
                let w = random_in_ball(&mut rng, p.d(), p.domain_radius());
                let v = random_in_ball(&mut rng, p.d(), p.domain_radius());
                let gw = p.loss_value(i, w.view()).unwrap();
                let gv = p.loss_value(i, v.view()).unwrap();
                let dw = p.loss_grad(i, w.view()).unwrap();
                let dv = p.loss_grad(i, v.view()).unwrap();
                let diff = &w - &v;
                let dist2 = diff.dot(&diff);
                let linear = gv + dv.dot(&diff);
                assert!(gw <= linear + 0.5 * beta * dist2 + 1e-9);
                assert!(gw >= linear - 1e-9);
                let gdiff = &dw - &dv;
                assert!(gdiff.dot(&gdiff).sqrt() <= beta * dist2.sqrt() + 1e-9);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::new(array![[0.1, -2.5], [1.0 / 3.0, 4.0]], array![1.0, -1.0]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("y,x1,x2\n"));
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn csv_rejects_bad_header_and_ragged_rows() {
        assert!(Dataset::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("y,x1\n1,2,3\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("y,x1\n1,abc\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("y,x1\n".as_bytes()).is_err());
    }
}
