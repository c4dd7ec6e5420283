//! Python bindings: network parameters, the analytic engine and the
//! Monte-Carlo estimator.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use relaycov::mcsim;
use relaycov::model::{self, MobilityScheme};
use relaycov::quad::QuadratureSpec;

fn to_py(e: relaycov::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn quantity(name: &str) -> PyResult<relaycov::Quantity> {
    name.parse().map_err(to_py)
}

fn threshold(beta_db: f64) -> PyResult<relaycov::Threshold> {
    relaycov::Threshold::from_db(beta_db).map_err(to_py)
}

#[pyclass(name = "NetworkParams", from_py_object)]
#[derive(Clone)]
struct PyNetworkParams {
    inner: relaycov::NetworkParams,
}

#[pymethods]
impl PyNetworkParams {
    /// Reference scenario, with any of the densities, altitude, powers or
    /// noise overridden.
    #[new]
    #[pyo3(signature = (*, lambda_t=None, lambda_r=None, h_r=None, p_t=None, p_r=None, sigma2=None))]
    fn new(
        lambda_t: Option<f64>,
        lambda_r: Option<f64>,
        h_r: Option<f64>,
        p_t: Option<f64>,
        p_r: Option<f64>,
        sigma2: Option<f64>,
    ) -> PyResult<Self> {
        let mut p = relaycov::NetworkParams::default();
        p.lambda_t = lambda_t.unwrap_or(p.lambda_t);
        p.lambda_r = lambda_r.unwrap_or(p.lambda_r);
        p.h_r = h_r.unwrap_or(p.h_r);
        p.p_t = p_t.unwrap_or(p.p_t);
        p.p_r = p_r.unwrap_or(p.p_r);
        p.sigma2 = sigma2.unwrap_or(p.sigma2);
        p.validate().map_err(to_py)?;
        Ok(Self { inner: p })
    }

    #[getter]
    fn lambda_t(&self) -> f64 {
        self.inner.lambda_t
    }

    #[getter]
    fn lambda_r(&self) -> f64 {
        self.inner.lambda_r
    }

    #[getter]
    fn h_r(&self) -> f64 {
        self.inner.h_r
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    /// Mean travel time of the serving relay at speed `v`.
    fn expected_travel_time(&self, v: f64) -> PyResult<f64> {
        model::expected_travel_time(&self.inner, v).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "NetworkParams(lambda_t={:e}, lambda_r={:e}, h_r={}, sigma2={:e})",
            p.lambda_t, p.lambda_r, p.h_r, p.sigma2
        )
    }
}

#[pyclass(name = "Mobility", from_py_object)]
#[derive(Clone, Copy)]
struct PyMobility {
    inner: relaycov::MobilityState,
}

#[pymethods]
impl PyMobility {
    /// `scheme` is one of `hover`, `random_direction`, `toward_user`.
    #[new]
    #[pyo3(signature = (scheme="toward_user", v=40.0, t=0.0))]
    fn new(scheme: &str, v: f64, t: f64) -> PyResult<Self> {
        let scheme: MobilityScheme = scheme.parse().map_err(to_py)?;
        let inner = relaycov::MobilityState { scheme, v, t };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.as_str()
    }

    #[getter]
    fn v(&self) -> f64 {
        self.inner.v
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    fn __repr__(&self) -> String {
        format!(
            "Mobility(scheme={:?}, v={}, t={})",
            self.inner.scheme.as_str(),
            self.inner.v,
            self.inner.t
        )
    }
}

#[pyclass(name = "CoverageEngine")]
struct PyCoverageEngine {
    inner: relaycov::CoverageEngine,
}

#[pymethods]
impl PyCoverageEngine {
    #[new]
    fn new(params: &PyNetworkParams) -> PyResult<Self> {
        let inner = relaycov::CoverageEngine::new(params.inner.clone()).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Coverage probability of `quantity` (e.g. `"total"`) at `beta_db`.
    fn coverage(
        &self,
        py: Python<'_>,
        quantity_name: &str,
        beta_db: f64,
        mobility: &PyMobility,
    ) -> PyResult<f64> {
        let query = relaycov::CoverageQuery {
            quantity: quantity(quantity_name)?,
            beta: threshold(beta_db)?,
        };
        let m = mobility.inner;
        py.detach(|| self.inner.evaluate(&query, &m)).map_err(to_py)
    }

    /// `(sd_a, sd_b, srd_a, srd_b)`: contributions to the total coverage of
    /// the direct and relay regions.
    fn region_terms(
        &self,
        py: Python<'_>,
        beta_db: f64,
        mobility: &PyMobility,
    ) -> PyResult<(f64, f64, f64, f64)> {
        let beta = threshold(beta_db)?;
        let m = mobility.inner;
        let r = py
            .detach(|| self.inner.region_terms(beta, &m))
            .map_err(to_py)?;
        Ok((r.sd_a, r.sd_b, r.srd_a, r.srd_b))
    }

    /// Probability of being served through a relay.
    fn association(&self, mobility: &PyMobility) -> PyResult<f64> {
        let spec = QuadratureSpec::new(1e-10, 1e-10);
        model::relay_association_probability(self.inner.params(), &mobility.inner, &spec)
            .map_err(to_py)
    }
}

#[pyclass(name = "McEstimate", skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyMcEstimate {
    #[pyo3(get)]
    value: f64,
    #[pyo3(get)]
    half_width: f64,
    #[pyo3(get)]
    n: usize,
    #[pyo3(get)]
    seed: u64,
}

#[pymethods]
impl PyMcEstimate {
    fn __repr__(&self) -> String {
        format!(
            "McEstimate(value={}, half_width={}, n={}, seed={})",
            self.value, self.half_width, self.n, self.seed
        )
    }
}

/// Monte-Carlo estimate of `quantity` at `beta_db`.
#[pyfunction]
#[pyo3(signature = (params, quantity_name, beta_db, mobility, n_drops=10_000, seed=1, disk_radius=100_000.0))]
fn mc_estimate(
    py: Python<'_>,
    params: &PyNetworkParams,
    quantity_name: &str,
    beta_db: f64,
    mobility: &PyMobility,
    n_drops: usize,
    seed: u64,
    disk_radius: f64,
) -> PyResult<PyMcEstimate> {
    let q = quantity(quantity_name)?;
    let beta = threshold(beta_db)?;
    let cfg = relaycov::McConfig {
        n_drops,
        seed,
        disk_radius,
    };
    let p = params.inner.clone();
    let m = mobility.inner;
    let e = py
        .detach(|| mcsim::estimate(&p, q, beta, &m, &cfg))
        .map_err(to_py)?;
    Ok(PyMcEstimate {
        value: e.value,
        half_width: e.half_width,
        n: e.n,
        seed: e.seed,
    })
}

#[pymodule(name = "relaycov")]
fn relaycov_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetworkParams>()?;
    m.add_class::<PyMobility>()?;
    m.add_class::<PyCoverageEngine>()?;
    m.add_class::<PyMcEstimate>()?;
    m.add_function(wrap_pyfunction!(mc_estimate, m)?)?;
    Ok(())
}
