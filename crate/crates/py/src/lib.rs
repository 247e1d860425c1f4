//! Python bindings. Node and request indices are zero-based, as in the Rust
//! API; rates are per hour and times in minutes.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ridepool::network::{all_pairs_shortest_paths, parse_edge_list, parse_tntp};
use ridepool::pipeline::{run_pipeline, PipelineParams};
use ridepool::spatial::{best_pool_option, Bag};
use ridepool::temporal::{pool_probability, pool_probability_mc, TemporalParams};

fn err(e: ridepool::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py_json(py: Python<'_>, value: serde_json::Value) -> PyResult<Py<PyAny>> {
    let text = value.to_string();
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Request", frozen, from_py_object)]
#[derive(Clone)]
struct PyRequest {
    inner: ridepool::Request,
}

#[pymethods]
impl PyRequest {
    #[new]
    fn new(origin: usize, destination: usize, rate: f64) -> PyResult<Self> {
        let inner = ridepool::Request::new(origin, destination, rate).map_err(err)?;
        Ok(PyRequest { inner })
    }

    #[getter]
    fn origin(&self) -> usize {
        self.inner.origin
    }

    #[getter]
    fn destination(&self) -> usize {
        self.inner.destination
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.inner.rate
    }

    fn __repr__(&self) -> String {
        format!(
            "Request({}, {}, {})",
            self.inner.origin, self.inner.destination, self.inner.rate
        )
    }
}

#[pyclass(name = "RoadNetwork", frozen)]
struct PyRoadNetwork {
    inner: ridepool::RoadNetwork,
}

#[pymethods]
impl PyRoadNetwork {
    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(PyRoadNetwork {
            inner: parse_edge_list(text).map_err(err)?,
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn arc_count(&self) -> usize {
        self.inner.arc_count()
    }

    /// `(tail, head, travel_time)` per arc.
    fn arcs(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .arcs()
            .iter()
            .map(|a| (a.tail, a.head, a.travel_time))
            .collect()
    }

    /// Dense shortest travel-time matrix, row = origin.
    fn shortest_path_times(&self) -> Vec<Vec<f64>> {
        let table = all_pairs_shortest_paths(&self.inner);
        let n = self.inner.node_count();
        (0..n)
            .map(|o| (0..n).map(|d| table.dist(o, d)).collect())
            .collect()
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }
}

/// Parses TNTP network, trips and optional node files.
#[pyfunction]
#[pyo3(signature = (net_text, trips_text, node_text=None))]
fn load_tntp(
    net_text: &str,
    trips_text: &str,
    node_text: Option<&str>,
) -> PyResult<(PyRoadNetwork, Vec<PyRequest>)> {
    let (net, reqs) = parse_tntp(net_text, trips_text, node_text).map_err(err)?;
    Ok((
        PyRoadNetwork { inner: net },
        reqs.into_iter().map(|inner| PyRequest { inner }).collect(),
    ))
}

/// Probability that streams with the given rates all fire within `t_bar`.
#[pyfunction]
fn pooling_probability(rates: Vec<f64>, t_bar: f64) -> PyResult<f64> {
    let params = TemporalParams::new(t_bar, rates).map_err(err)?;
    Ok(pool_probability(&params))
}

/// Monte Carlo estimate and standard error of [`pooling_probability`].
#[pyfunction]
#[pyo3(signature = (rates, t_bar, samples=100_000, seed=0))]
fn pooling_probability_mc(rates: Vec<f64>, t_bar: f64, samples: u64, seed: u64) -> PyResult<(f64, f64)> {
    let params = TemporalParams::new(t_bar, rates).map_err(err)?;
    let mc = pool_probability_mc(&params, samples, seed);
    Ok((mc.estimate, mc.std_error))
}

/// Best feasible serving sequence of a bag, as a dict.
#[pyfunction]
fn best_option(
    py: Python<'_>,
    network: &PyRoadNetwork,
    requests: Vec<PyRequest>,
    bag: Vec<usize>,
    delta_bar: f64,
) -> PyResult<Py<PyAny>> {
    let reqs: Vec<ridepool::Request> = requests.into_iter().map(|r| r.inner).collect();
    if let Some(&b) = bag.iter().find(|&&b| b >= reqs.len()) {
        return Err(PyValueError::new_err(format!("bag element {b} out of range")));
    }
    let table = all_pairs_shortest_paths(&network.inner);
    let opt = best_pool_option(&Bag::new(bag), &table, &reqs, delta_bar);
    // Infinite costs of infeasible bags become None.
    let value = serde_json::to_value(&opt).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py_json(py, value)
}

/// Full pipeline on one waiting window; returns the metrics as a dict.
#[pyfunction]
#[pyo3(signature = (network, requests, k_max, delta_bar, t_bar, rho=1.0))]
fn run(
    py: Python<'_>,
    network: &PyRoadNetwork,
    requests: Vec<PyRequest>,
    k_max: usize,
    delta_bar: f64,
    t_bar: f64,
    rho: f64,
) -> PyResult<Py<PyAny>> {
    let reqs: Vec<ridepool::Request> = requests.into_iter().map(|r| r.inner).collect();
    let mut params = PipelineParams::new(k_max, delta_bar, t_bar);
    params.rho = rho;
    let out = py
        .detach(|| run_pipeline(&network.inner, &reqs, &params))
        .map_err(err)?;
    let value = serde_json::to_value(&out.metrics).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py_json(py, value)
}

#[pymodule]
fn ridepool_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRequest>()?;
    m.add_class::<PyRoadNetwork>()?;
    m.add_function(wrap_pyfunction!(load_tntp, m)?)?;
    m.add_function(wrap_pyfunction!(pooling_probability, m)?)?;
    m.add_function(wrap_pyfunction!(pooling_probability_mc, m)?)?;
    m.add_function(wrap_pyfunction!(best_option, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
