//! Python bindings: measures, exact transport, velocity models, schemes,
//! closed-form bounds and the L¹ counterexample.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::wasserflow::bounds;
use ::wasserflow::counterexample::{self as cx, NuFamily};
use ::wasserflow::harness::{self, RunConfig};
use ::wasserflow::measure::io::{read_measure_str, write_measure_string};
use ::wasserflow::measure::{grid_project, AtomCloud, GridSpec, Measure as CoreMeasure, SquareCloud};
use ::wasserflow::schemes::{run_scheme, SchemeConfig, SchemeKind};
use ::wasserflow::transport;
use ::wasserflow::velocity::{
    f1_discontinuity_demo, DesiredField, InteractionSpec, KernelShape, KernelSpec, VelocityModel as CoreModel, Weight,
};
use ::wasserflow::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for ::wasserflow::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Row-major flattening; every row must have the same length.
fn flatten(rows: &[Vec<f64>]) -> PyResult<(usize, Vec<f64>)> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(PyValueError::new_err("all points must have the same dimension"));
    }
    Ok((dim, rows.iter().flatten().copied().collect()))
}

fn unflatten(dim: usize, flat: &[f64]) -> Vec<Vec<f64>> {
    flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect()
}

/// A finite measure: atoms, equal-side squares or a gridded density.
#[pyclass(name = "Measure", module = "wasserflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Measure {
    inner: CoreMeasure,
}

#[pymethods]
impl Measure {
    /// Weighted Dirac atoms at `points`.
    #[staticmethod]
    fn atoms(points: Vec<Vec<f64>>, masses: Vec<f64>) -> PyResult<Self> {
        let (dim, flat) = flatten(&points)?;
        let cloud = AtomCloud::new(dim.max(1), flat, masses).py()?;
        Ok(Self {
            inner: CoreMeasure::Atoms(cloud),
        })
    }

    /// Uniform squares of side `side` centered at `centers`.
    #[staticmethod]
    fn squares(side: f64, centers: Vec<Vec<f64>>, masses: Vec<f64>) -> PyResult<Self> {
        let (dim, flat) = flatten(&centers)?;
        let cloud = SquareCloud::new(dim.max(1), side, flat, masses).py()?;
        Ok(Self {
            inner: CoreMeasure::Squares(cloud),
        })
    }

    /// Parses the text measure format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: read_measure_str(text).py()?,
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ::wasserflow::measure::io::read_measure(&path).py()?,
        })
    }

    fn to_text(&self) -> String {
        write_measure_string(&self.inner)
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        ::wasserflow::measure::io::write_measure(&path, &self.inner).py()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            CoreMeasure::Atoms(_) => "atoms",
            CoreMeasure::Squares(_) => "squares",
            CoreMeasure::Grid(_) => "grid",
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    #[getter]
    fn piece_count(&self) -> usize {
        self.inner.piece_count()
    }

    #[getter]
    fn piece_side(&self) -> f64 {
        self.inner.piece_side()
    }

    /// Midpoint quadrature of order `q` as `(points, masses)`.
    #[pyo3(signature = (q = 1))]
    fn to_atoms(&self, q: usize) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
        let a = self.inner.to_atoms(q).py()?;
        Ok((unflatten(a.dim(), a.positions()), a.masses().to_vec()))
    }

    /// Mass-preserving projection onto the grid of side `dx` anchored at 0.
    fn grid_project(&self, dx: f64) -> PyResult<Self> {
        let grid = GridSpec::anchored(self.inner.dim(), dx).py()?;
        Ok(Self {
            inner: CoreMeasure::Grid(grid_project(&self.inner, &grid).py()?),
        })
    }

    fn mass_in_box(&self, lo: Vec<f64>, hi: Vec<f64>) -> PyResult<f64> {
        if lo.len() != self.inner.dim() || hi.len() != self.inner.dim() {
            return Err(PyValueError::new_err("box corners must match the measure dimension"));
        }
        Ok(self.inner.mass_in_box(&lo, &hi))
    }

    fn __repr__(&self) -> String {
        format!(
            "Measure(kind={}, dim={}, pieces={}, mass={})",
            self.kind(),
            self.dim(),
            self.piece_count(),
            self.total_mass()
        )
    }
}

/// Exact `W_p` between atomic measures: `(value, [(i, j, mass), ...])`.
#[pyfunction]
#[pyo3(signature = (points_a, masses_a, points_b, masses_b, p = 1.0))]
fn wasserstein_atoms(
    points_a: Vec<Vec<f64>>,
    masses_a: Vec<f64>,
    points_b: Vec<Vec<f64>>,
    masses_b: Vec<f64>,
    p: f64,
) -> PyResult<(f64, Vec<(usize, usize, f64)>)> {
    let (da, fa) = flatten(&points_a)?;
    let (db, fb) = flatten(&points_b)?;
    let a = AtomCloud::new(da.max(1), fa, masses_a).py()?;
    let b = AtomCloud::new(db.max(1), fb, masses_b).py()?;
    let r = transport::wasserstein_atoms(&a, &b, p).py()?;
    Ok((r.value, r.plan.entries))
}

/// Quadrature estimate of `W_p(a, b)` as `(estimate, halo)`.
#[pyfunction]
#[pyo3(signature = (a, b, p = 1.0, quadrature = 4))]
fn wasserstein(py: Python<'_>, a: &Measure, b: &Measure, p: f64, quadrature: usize) -> PyResult<(f64, f64)> {
    let d = py
        .detach(|| transport::wasserstein_measures(&a.inner, &b.inner, p, quadrature))
        .py()?;
    Ok((d.estimate, d.halo))
}

/// Desired field plus optional kernel interaction.
#[pyclass(name = "VelocityModel", module = "wasserflow", frozen, skip_from_py_object)]
#[derive(Clone)]
struct VelocityModel {
    inner: CoreModel,
}

#[pymethods]
impl VelocityModel {
    /// Constant desired velocity `u` plus, when `radius` is given, the
    /// interaction `strength (x - x*) phi^alpha` with a `kernel` of that radius.
    #[new]
    #[pyo3(signature = (u, radius = None, peak = 1.0, alpha = 1.0, strength = 1.0, kernel = "cone", rigorous = false))]
    fn new(
        u: Vec<f64>,
        radius: Option<f64>,
        peak: f64,
        alpha: f64,
        strength: f64,
        kernel: &str,
        rigorous: bool,
    ) -> PyResult<Self> {
        let desired = if u.iter().all(|c| *c == 0.0) {
            DesiredField::Zero
        } else {
            DesiredField::Constant(u)
        };
        let interaction = match radius {
            Some(r) => {
                let k = KernelSpec::new(KernelShape::from_name(kernel).py()?, r, peak).py()?;
                Some(InteractionSpec::new(k, Weight::Power(alpha), strength).py()?)
            }
            None => None,
        };
        let mut inner = CoreModel::new(desired, interaction);
        if rigorous {
            inner = inner.with_rigorous_constants();
        }
        Ok(Self { inner })
    }

    /// Certified `(L, M, K)`.
    fn constants(&self) -> PyResult<(f64, f64, f64)> {
        let c = self.inner.constants().py()?;
        Ok((c.l, c.m, c.k))
    }

    /// `v[mu](x)` for each point, with `mu` sampled by quadrature of order `q`.
    #[pyo3(signature = (mu, points, q = 1))]
    fn eval(&self, mu: &Measure, points: Vec<Vec<f64>>, q: usize) -> PyResult<Vec<Vec<f64>>> {
        let atoms = mu.inner.to_atoms(q).py()?;
        let (dim, flat) = flatten(&points)?;
        if dim != atoms.dim() {
            return Err(PyValueError::new_err("points must match the measure dimension"));
        }
        let field = self.inner.freeze(&atoms);
        let out = field.eval_many(&flat).py()?;
        Ok(unflatten(dim, &out))
    }
}

/// Runs `scheme` ("particles", "lagrangian" or "eulerian") from `mu0`.
/// Returns `[(t, Measure), ...]`.
#[pyfunction]
#[pyo3(signature = (scheme, mu0, model, t_final, dt, dx, p = 1.0, quadrature = 1))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    scheme: &str,
    mu0: &Measure,
    model: &VelocityModel,
    t_final: f64,
    dt: f64,
    dx: f64,
    p: f64,
    quadrature: usize,
) -> PyResult<Vec<(f64, Measure)>> {
    let kind = SchemeKind::from_name(scheme).py()?;
    let cfg = SchemeConfig::new(t_final, dt, dx)
        .py()?
        .with_p(p)
        .with_quadrature(quadrature);
    let traj = py.detach(|| run_scheme(kind, &mu0.inner, &model.inner, &cfg)).py()?;
    Ok(traj
        .frames()
        .iter()
        .map(|(t, m)| (*t, Measure { inner: m.clone() }))
        .collect())
}

fn load(path: &Path) -> PyResult<RunConfig> {
    harness::load_config(path).py()
}

/// Runs the convergence study of a scenario file and returns its summary.
#[pyfunction]
fn converge<'py>(py: Python<'py>, config: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(&config)?;
    let study = py.detach(|| harness::run_convergence_study(&cfg)).py()?;
    let d = PyDict::new(py);
    d.set_item("dx", study.levels.iter().map(|l| l.dx).collect::<Vec<_>>())?;
    d.set_item("dt", study.levels.iter().map(|l| l.dt).collect::<Vec<_>>())?;
    d.set_item("error", study.errors())?;
    d.set_item("halo", study.levels.iter().map(|l| l.halo).collect::<Vec<_>>())?;
    d.set_item("bound", study.levels.iter().map(|l| l.bound).collect::<Vec<_>>())?;
    d.set_item(
        "hypothesis_ok",
        study.levels.iter().map(|l| l.hypothesis_ok).collect::<Vec<_>>(),
    )?;
    d.set_item("order", study.fit.map(|f| f.order))?;
    d.set_item("r2", study.fit.map(|f| f.r2))?;
    Ok(d)
}

/// `e^{(p+1) L t / p}`; `p = inf` gives `e^{L t}`.
#[pyfunction]
fn flow_contraction(p: f64, l: f64, t: f64) -> PyResult<f64> {
    bounds::flow_contraction(p, l, t).py()
}

#[pyfunction]
fn flow_displacement(m: f64, t: f64) -> f64 {
    bounds::flow_displacement(m, t)
}

/// Coefficients of `W_p(mu_0, nu_0)` and `||v - w||` in the two-field estimate.
#[pyfunction]
fn two_field_gap(p: f64, l: f64, t: f64) -> PyResult<(f64, f64)> {
    bounds::two_field_gap(p, l, t).py()
}

#[pyfunction]
#[pyo3(signature = (n, dx, mass = 1.0, p = 1.0))]
fn projection_bound(n: usize, dx: f64, mass: f64, p: f64) -> f64 {
    bounds::projection_bound(n, dx, mass, p)
}

#[pyfunction]
fn stability_constant(t: f64, l: f64, k: f64) -> f64 {
    bounds::stability_constant(t, l, k)
}

/// `(value, hypothesis_ok)`.
#[pyfunction]
fn scheme1_error(k: f64, m: f64, l: f64, p: f64, t: f64, dt: f64) -> (f64, bool) {
    let g = bounds::scheme1_error(k, m, l, p, t, dt);
    (g.value, g.hypothesis_ok)
}

/// `(value, hypothesis_ok)`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn scheme3_error(k: f64, m: f64, l: f64, p: f64, t: f64, dt: f64, n: usize, dx: f64) -> (f64, bool) {
    let g = bounds::scheme3_error(k, m, l, p, t, dt, n, dx);
    (g.value, g.hypothesis_ok)
}

/// `(value, hypothesis_ok)`.
#[pyfunction]
fn scheme4_gap(l: f64, k: f64, n: usize, t: f64, dx: f64, dt: f64) -> (f64, bool) {
    let g = bounds::scheme4_gap(l, k, n, t, dx, dt);
    (g.value, g.hypothesis_ok)
}

#[pyfunction]
fn scheme5_gap(p: f64, l: f64, k: f64, n: usize, t: f64, dx: f64, dt: f64) -> PyResult<f64> {
    bounds::scheme5_gap(p, l, k, n, t, dx, dt).py()
}

/// Mass of the staircase family truncated after `truncation` squares.
#[pyfunction]
#[pyo3(signature = (truncation = 20))]
fn nu_truncated_mass(truncation: usize) -> PyResult<f64> {
    Ok(NuFamily::new(truncation).py()?.truncated_mass())
}

/// Exact L¹ distance between `nu_t` and `nu_s`.
#[pyfunction]
#[pyo3(signature = (t, s, truncation = 20))]
fn nu_l1_distance(t: f64, s: f64, truncation: usize) -> PyResult<f64> {
    let fam = NuFamily::new(truncation).py()?;
    Ok(cx::l1_distance(&cx::eval_nu(t, &fam).py()?, &cx::eval_nu(s, &fam).py()?))
}

/// The L¹-Lipschitz velocity evaluated on `nu_t`.
#[pyfunction]
#[pyo3(signature = (t, truncation = 20))]
fn nu_velocity(t: f64, truncation: usize) -> PyResult<(f64, f64)> {
    let fam = NuFamily::new(truncation).py()?;
    let v = cx::v_l1(&cx::eval_nu(t, &fam).py()?, &fam).py()?;
    Ok((v[0], v[1]))
}

/// Largest `2 ||v[nu_t] - v[nu_s]|| / L¹(nu_t, nu_s)` over `pairs`.
#[pyfunction]
#[pyo3(signature = (pairs, truncation = 20))]
fn l1_lipschitz_ratio(pairs: Vec<(f64, f64)>, truncation: usize) -> PyResult<f64> {
    let fam = NuFamily::new(truncation).py()?;
    Ok(cx::verify_l1_lipschitz(&fam, &pairs).py()?.max_ratio())
}

/// Whether both solutions from `nu_0` pass their checks.
#[pyfunction]
#[pyo3(signature = (t_final = 1.0, dt = 0.01, truncation = 20))]
fn nonuniqueness(t_final: f64, dt: f64, truncation: usize) -> PyResult<bool> {
    let fam = NuFamily::new(truncation).py()?;
    Ok(cx::demonstrate_nonuniqueness(&fam, t_final, dt).py()?.passes())
}

/// Rows `(t, |v[mu_t](0)|, W_p bound, measured W_p, halo)` of the
/// constant-weight discontinuity demonstration.
#[pyfunction]
#[pyo3(signature = (t_list, r = 0.5, eps = 0.1, radius = 1.0, p = 1.0, resolution = 40))]
fn f1_discontinuity(
    t_list: Vec<f64>,
    r: f64,
    eps: f64,
    radius: f64,
    p: f64,
    resolution: usize,
) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
    let rep = f1_discontinuity_demo(r, eps, radius, &t_list, p, resolution).py()?;
    Ok(rep
        .rows
        .iter()
        .map(|w| (w.t, w.speed, w.bound, w.measured, w.halo))
        .collect())
}

#[pymodule(name = "wasserflow")]
fn wasserflow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Measure>()?;
    m.add_class::<VelocityModel>()?;
    m.add_function(wrap_pyfunction!(wasserstein_atoms, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    m.add_function(wrap_pyfunction!(flow_contraction, m)?)?;
    m.add_function(wrap_pyfunction!(flow_displacement, m)?)?;
    m.add_function(wrap_pyfunction!(two_field_gap, m)?)?;
    m.add_function(wrap_pyfunction!(projection_bound, m)?)?;
    m.add_function(wrap_pyfunction!(stability_constant, m)?)?;
    m.add_function(wrap_pyfunction!(scheme1_error, m)?)?;
    m.add_function(wrap_pyfunction!(scheme3_error, m)?)?;
    m.add_function(wrap_pyfunction!(scheme4_gap, m)?)?;
    m.add_function(wrap_pyfunction!(scheme5_gap, m)?)?;
    m.add_function(wrap_pyfunction!(nu_truncated_mass, m)?)?;
    m.add_function(wrap_pyfunction!(nu_l1_distance, m)?)?;
    m.add_function(wrap_pyfunction!(nu_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(l1_lipschitz_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(nonuniqueness, m)?)?;
    m.add_function(wrap_pyfunction!(f1_discontinuity, m)?)?;
    Ok(())
}
