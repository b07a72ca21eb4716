//! Python bindings: the world, the classifiers, the dialogue lexicon, the
//! reward arithmetic, experiments and live sessions.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use vislearn::dialogue::{format_tags, Actor, DialogueAct, TemplateLexicon};
use vislearn::harness::{self, ExperimentConfig};
use vislearn::live;
use vislearn::policy::{self, DialogueRewards, Threshold, ThresholdAction};
use vislearn::vision;
use vislearn::world::{self, Category, WorldConfig};
use vislearn::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::UnknownSession(_) | Error::UnknownAttribute(_) => PyKeyError::new_err(e.to_string()),
        Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, json_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn category(name: &str) -> PyResult<Category> {
    match name {
        "colour" | "color" => Ok(Category::Colour),
        "shape" => Ok(Category::Shape),
        _ => Err(PyValueError::new_err(format!("unknown category `{name}`"))),
    }
}

fn actor(name: &str) -> PyResult<Actor> {
    name.parse().map_err(py_err)
}

fn config_from(toml: Option<&str>) -> PyResult<ExperimentConfig> {
    match toml {
        Some(t) => ExperimentConfig::from_toml(t).map_err(py_err),
        None => Ok(ExperimentConfig::default()),
    }
}

#[pyclass(name = "VisualObject", frozen, from_py_object)]
#[derive(Clone)]
struct PyVisualObject {
    inner: world::VisualObject,
}

#[pymethods]
impl PyVisualObject {
    #[getter]
    fn id(&self) -> u64 {
        self.inner.id
    }

    #[getter]
    fn colour(&self) -> String {
        self.inner.colour.clone()
    }

    #[getter]
    fn shape(&self) -> String {
        self.inner.shape.clone()
    }

    #[getter]
    fn colour_features(&self) -> Vec<f64> {
        self.inner.colour_features.clone()
    }

    #[getter]
    fn shape_features(&self) -> Vec<f64> {
        self.inner.shape_features.clone()
    }

    fn __repr__(&self) -> String {
        format!("VisualObject(id={}, colour={:?}, shape={:?})", self.inner.id, self.inner.colour, self.inner.shape)
    }
}

fn wrap(objs: Vec<world::VisualObject>) -> Vec<PyVisualObject> {
    objs.into_iter().map(|inner| PyVisualObject { inner }).collect()
}

fn unwrap(objs: &[PyVisualObject]) -> Vec<world::VisualObject> {
    objs.iter().map(|o| o.inner.clone()).collect()
}

/// Returns `(train, test)` lists of objects.
#[pyfunction]
#[pyo3(signature = (seed=0, train_size=500, test_size=100, noise_sigma=0.08))]
fn generate_dataset(
    seed: u64,
    train_size: usize,
    test_size: usize,
    noise_sigma: f64,
) -> PyResult<(Vec<PyVisualObject>, Vec<PyVisualObject>)> {
    let cfg = WorldConfig { seed, train_size, test_size, noise_sigma, ..Default::default() };
    let data = world::generate_dataset(&cfg).map_err(py_err)?;
    Ok((wrap(data.train), wrap(data.test)))
}

#[pyclass(name = "GroundingMap")]
struct PyGroundingMap {
    inner: vision::GroundingMap,
}

#[pymethods]
impl PyGroundingMap {
    #[new]
    #[pyo3(signature = (learning_rate=vision::DEFAULT_LEARNING_RATE, l2=0.0))]
    fn new(learning_rate: f64, l2: f64) -> Self {
        let inner = vision::GroundingMap::new(&WorldConfig::default()).with_learning_rate(learning_rate).with_l2(l2);
        Self { inner }
    }

    fn learn(&mut self, obj: &PyVisualObject, word: &str) -> PyResult<()> {
        self.inner.learn_from_label(&obj.inner, word).map_err(py_err)
    }

    fn best_prediction(&self, obj: &PyVisualObject, category_name: &str) -> PyResult<(String, f64)> {
        let cat = category(category_name)?;
        self.inner.best_prediction(cat, obj.inner.features(cat)).map_err(py_err)
    }

    fn confidences(&self, obj: &PyVisualObject) -> PyResult<Vec<(String, f64)>> {
        self.inner.confidences(&obj.inner).map_err(py_err)
    }

    fn accuracy<'py>(&self, py: Python<'py>, objects: Vec<PyVisualObject>) -> PyResult<Bound<'py, PyAny>> {
        let acc = self.inner.accuracy(&unwrap(&objects)).map_err(py_err)?;
        to_py(py, &acc)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: vision::GroundingMap::read_text(text.as_bytes()).map_err(py_err)? })
    }
}

/// Status 0/1/2 of a prediction with this confidence.
#[pyfunction]
#[pyo3(signature = (confidence, threshold, provided=false))]
fn status(confidence: f64, threshold: f64, provided: bool) -> u8 {
    vision::status_with_override(confidence, threshold, provided).level()
}

#[pyfunction]
fn delta_acc_level(prev_acc: f64, cur_acc: f64) -> i8 {
    policy::delta_acc_level(prev_acc, cur_acc)
}

#[pyfunction]
#[pyo3(signature = (prev_acc, cur_acc, k=100.0))]
fn threshold_reward(prev_acc: f64, cur_acc: f64, k: f64) -> f64 {
    policy::threshold_reward(prev_acc, cur_acc, k)
}

/// `action` is "Increase", "Decrease" or "Keep".
#[pyfunction]
fn apply_threshold_action(threshold: f64, action: &str) -> PyResult<f64> {
    let thd = Threshold::from_value(threshold)
        .ok_or_else(|| PyValueError::new_err(format!("{threshold} is not on the threshold grid")))?;
    let a: ThresholdAction = action.parse().map_err(py_err)?;
    Ok(policy::apply_threshold_action(thd, a).value())
}

#[pyfunction]
#[pyo3(signature = (total_cost, penalties, success=10.0, penalty=2.0))]
fn global_reward(total_cost: f64, penalties: u32, success: f64, penalty: f64) -> f64 {
    policy::global_reward(total_cost, penalties, &DialogueRewards { success, penalty, ..Default::default() })
}

#[pyfunction]
fn r_perf(delta_acc: f64, total_cost: f64) -> PyResult<f64> {
    harness::r_perf(delta_acc, total_cost).map_err(py_err)
}

#[pyclass(name = "Lexicon")]
struct PyLexicon {
    inner: TemplateLexicon,
}

#[pymethods]
impl PyLexicon {
    /// `surface` is "english" or "burchak".
    #[new]
    #[pyo3(signature = (surface="english"))]
    fn new(surface: &str) -> PyResult<Self> {
        let cfg = ExperimentConfig { surface: surface.to_string(), ..Default::default() };
        cfg.validate().map_err(py_err)?;
        Ok(Self { inner: cfg.lexicon().map_err(py_err)? })
    }

    /// Acts in tag syntax, or None when the text does not parse.
    fn parse(&self, speaker: &str, utterance: &str) -> PyResult<Option<String>> {
        Ok(self.inner.parse(actor(speaker)?, utterance).map(|acts| format_tags(&acts)))
    }

    #[pyo3(signature = (speaker, tags, seed=0))]
    fn generate(&self, speaker: &str, tags: &str, seed: u64) -> PyResult<String> {
        use rand::SeedableRng;
        let acts = DialogueAct::parse_tags(actor(speaker)?, tags).map_err(py_err)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        self.inner.generate_turn(&acts, &mut rng).map_err(py_err)
    }
}

/// Runs an experiment from a TOML config (defaults when omitted) and
/// returns the summary rows; with `out_dir` also writes all output files.
#[pyfunction]
#[pyo3(signature = (config_toml=None, out_dir=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_toml: Option<&str>,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(config_toml)?;
    let out = py.detach(|| harness::run_experiment(&cfg)).map_err(py_err)?;
    if let Some(dir) = out_dir {
        harness::write_outputs(&cfg, &out, &dir).map_err(py_err)?;
    }
    to_py(py, &out.summary.conditions)
}

/// A live session held in memory, with the caller playing the tutor.
#[pyclass(name = "LiveSession", unsendable)]
struct PyLiveSession {
    inner: live::Session,
}

#[pymethods]
impl PyLiveSession {
    /// Only `rule-constant95` needs no tables; `rl-pretrained` pretrains an
    /// agent on fold 0 of the config first.
    #[new]
    #[pyo3(signature = (policy="rule-constant95", world_seed=0, config_toml=None))]
    fn new(policy: &str, world_seed: u64, config_toml: Option<&str>) -> PyResult<Self> {
        let kind: live::LivePolicy = policy.parse().map_err(py_err)?;
        let cfg = config_from(config_toml)?;
        let agent = match kind {
            live::LivePolicy::RlPretrained => Some(harness::pretrain_agent(&cfg, 0).map_err(py_err)?.0),
            live::LivePolicy::RuleConstant95 => None,
        };
        let inner = live::Session::new("py", kind, world_seed, cfg, agent.as_ref()).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn advance<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let msgs = self.inner.advance().map_err(py_err)?;
        to_py(py, &msgs)
    }

    fn step<'py>(&mut self, py: Python<'py>, utterance: &str) -> PyResult<Bound<'py, PyAny>> {
        let msgs = self.inner.step(utterance).map_err(py_err)?;
        to_py(py, &msgs)
    }

    fn end<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let msg = self.inner.end().map_err(py_err)?;
        to_py(py, &msg)
    }

    fn readout<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.readout().map_err(py_err)?)
    }

    fn grounding_text(&self) -> String {
        self.inner.grounding().to_text()
    }

    #[getter]
    fn total_cost(&self) -> f64 {
        self.inner.total_cost()
    }
}

#[pymodule]
pub fn vislearn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVisualObject>()?;
    m.add_class::<PyGroundingMap>()?;
    m.add_class::<PyLexicon>()?;
    m.add_class::<PyLiveSession>()?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(status, m)?)?;
    m.add_function(wrap_pyfunction!(delta_acc_level, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_reward, m)?)?;
    m.add_function(wrap_pyfunction!(apply_threshold_action, m)?)?;
    m.add_function(wrap_pyfunction!(global_reward, m)?)?;
    m.add_function(wrap_pyfunction!(r_perf, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
