//! Python bindings. Block and attestation ids cross the boundary as 16-digit
//! hex strings, checkpoint pairs as `(block_hex, epoch)` tuples.

use std::sync::Arc;

use gasperlab_core::analytics::{self, BoundForm};
use gasperlab_core::config::Scenario;
use gasperlab_core::equiv_game::{self, Regime};
use gasperlab_core::ffg;
use gasperlab_core::fork_choice;
use gasperlab_core::slashing::{self, ValidatorSetDiff};
use gasperlab_core::{simulator, snapshot};
use gasperlab_core::{AttestationId, Block, BlockId, CheckpointPair, MessageId, ValidatorId, ValidatorSet};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: gasperlab_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn block_id(s: &str) -> PyResult<BlockId> {
    u64::from_str_radix(s, 16).map(BlockId).map_err(|_| PyValueError::new_err(format!("bad block id `{s}`")))
}

fn pair(p: &CheckpointPair) -> (String, u64) {
    (p.block.to_string(), p.epoch)
}

fn ids(added: Vec<MessageId>) -> Vec<String> {
    added.iter().map(|m| m.to_string()).collect()
}

#[pyclass(name = "View", module = "gasperlab")]
struct PyView {
    inner: gasperlab_core::View,
}

#[pymethods]
impl PyView {
    #[new]
    #[pyo3(signature = (slots_per_epoch, stakes))]
    fn new(slots_per_epoch: u64, stakes: Vec<f64>) -> PyResult<Self> {
        if slots_per_epoch == 0 {
            return Err(PyValueError::new_err("slots_per_epoch must be positive"));
        }
        let vs = ValidatorSet::new(stakes).map_err(err)?;
        Ok(PyView { inner: gasperlab_core::View::new(slots_per_epoch, Arc::new(vs)) })
    }

    #[staticmethod]
    fn from_snapshot(text: &str) -> PyResult<Self> {
        snapshot::import(text).map(|inner| PyView { inner }).map_err(err)
    }

    fn snapshot(&self) -> String {
        snapshot::export(&self.inner)
    }

    /// Delivers a block and returns its id. Messages it unblocks are
    /// accepted as a side effect.
    #[pyo3(signature = (proposer, slot, parent, attests=Vec::new(), payload=Vec::new(), timestamp=None))]
    fn add_block(
        &mut self,
        proposer: u32,
        slot: u64,
        parent: &str,
        attests: Vec<String>,
        payload: Vec<u8>,
        timestamp: Option<f64>,
    ) -> PyResult<String> {
        let atts = attests
            .iter()
            .map(|a| u64::from_str_radix(a, 16).map(AttestationId))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| PyValueError::new_err("bad attestation id"))?;
        let mut b = Block::new(ValidatorId(proposer), slot, block_id(parent)?, atts, payload);
        if let Some(t) = timestamp {
            b = b.with_timestamp(t);
        }
        let id = b.id.to_string();
        self.inner.deliver(b).map_err(err)?;
        Ok(id)
    }

    /// Builds the attestation an honest validator would cast for `head` and
    /// delivers it. Returns the attestation id.
    fn attest(&mut self, author: u32, slot: u64, head: &str) -> PyResult<String> {
        let a = ffg::build_attestation(&self.inner, ValidatorId(author), slot, block_id(head)?).map_err(err)?;
        let id = format!("{:016x}", a.id.0);
        self.inner.deliver(a).map_err(err)?;
        Ok(id)
    }

    fn advance_clock(&mut self, t: f64) -> Vec<String> {
        ids(self.inner.advance_clock(t))
    }

    #[getter]
    fn block_count(&self) -> usize {
        self.inner.block_count()
    }

    #[getter]
    fn attestation_count(&self) -> usize {
        self.inner.attestation_count()
    }

    #[getter]
    fn pending_count(&self) -> usize {
        self.inner.pending_count()
    }

    fn leaves(&self) -> Vec<String> {
        self.inner.leaves().iter().map(|b| b.to_string()).collect()
    }

    fn chain(&self, block: &str) -> PyResult<Vec<String>> {
        Ok(self.inner.chain(block_id(block)?).map_err(err)?.iter().map(|b| b.to_string()).collect())
    }

    /// Head under `rule`: "hlmd", "prototype" or "ghost".
    #[pyo3(signature = (rule="hlmd"))]
    fn head(&self, rule: &str) -> PyResult<String> {
        let h = match rule {
            "hlmd" => fork_choice::hlmd(&self.inner),
            "prototype" => fork_choice::hlmd_prototype(&self.inner),
            "ghost" => fork_choice::lmd_ghost(&self.inner),
            other => return Err(PyValueError::new_err(format!("unknown rule `{other}`"))),
        };
        Ok(h.to_string())
    }

    fn justified(&self) -> Vec<(String, u64)> {
        ffg::justified(&self.inner).iter().map(pair).collect()
    }

    fn finalized(&self) -> Vec<(String, u64)> {
        ffg::finalized(&self.inner).iter().map(pair).collect()
    }

    /// `(block, epoch, k)` for each finalized pair, with its smallest k.
    fn finalizations(&self) -> Vec<(String, u64, u64)> {
        ffg::finalizations(&self.inner).iter().map(|f| (f.pair.block.to_string(), f.pair.epoch, f.k)).collect()
    }

    fn detect<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = slashing::detect(&self.inner);
        let out = PyDict::new(py);
        let offenders: Vec<u32> = d.offenders.iter().map(|v| v.0).collect();
        let evidence: Vec<(u32, String, String, String)> = d
            .evidence
            .iter()
            .map(|e| (e.author.0, format!("{:?}", e.kind), e.first.to_string(), e.second.to_string()))
            .collect();
        out.set_item("offenders", offenders)?;
        out.set_item("slashable_stake", d.slashable_stake)?;
        out.set_item("evidence", evidence)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "View(blocks={}, attestations={}, pending={})",
            self.inner.block_count(),
            self.inner.attestation_count(),
            self.inner.pending_count()
        )
    }
}

#[pyfunction]
fn genesis() -> String {
    BlockId::GENESIS.to_string()
}

/// Probability that n epochs pass without a finalization when each epoch
/// justifies with probability p. `method` is "closed", "dp" or "enum".
#[pyfunction]
#[pyo3(signature = (n, p, method="closed"))]
fn no_finalization_prob(n: u32, p: f64, method: &str) -> PyResult<f64> {
    match method {
        "closed" => analytics::no_finalization_prob(n, p),
        "dp" => analytics::no_finalization_prob_dp(n, p),
        "enum" => analytics::no_finalization_prob_enum(n, p),
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    }
    .map_err(err)
}

/// Rows of `(n, p, closed_form, dp, enumeration)`.
#[pyfunction]
fn table1() -> Vec<(u32, f64, f64, f64, Option<f64>)> {
    analytics::table1().into_iter().map(|r| (r.n, r.p, r.closed_form, r.dp, r.enumeration)).collect()
}

#[pyfunction]
#[pyo3(signature = (committee_size, s, eps, tight=false))]
fn justification_event_bound(committee_size: u64, s: f64, eps: f64, tight: bool) -> PyResult<f64> {
    let form = if tight { BoundForm::Tight } else { BoundForm::Weak };
    analytics::justification_event_bound(committee_size, s, eps, form).map_err(err)
}

#[pyfunction]
fn dynamic_safety_bound(w_left: f64, w_right: f64, a_left: f64, e_left: f64, a_right: f64, e_right: f64) -> (f64, f64) {
    let d = ValidatorSetDiff { w_left, w_right, a_left, e_left, a_right, e_right };
    (slashing::dynamic_safety_bound(&d), slashing::linear_combination_bound(&d))
}

/// Win rate of the equivocating adversary. `settings` uses the scenario
/// file keys, e.g. `{"regime": "inbetween", "dishonest_time": "0.4"}`.
#[pyfunction]
#[pyo3(signature = (settings=None, seed=0))]
fn equiv_game_win_rate(py: Python<'_>, settings: Option<Vec<(String, String)>>, seed: u64) -> PyResult<f64> {
    let sc = Scenario::from_entries(settings.unwrap_or_default().into_iter().collect()).map_err(err)?.with_seed(seed);
    py.detach(|| equiv_game::estimate_win_rate(&sc.equiv)).map_err(err)
}

#[pyfunction]
fn regimes() -> Vec<(&'static str, f64, f64, f64)> {
    Regime::all()
        .iter()
        .map(|r| {
            let (a, e1, e2) = r.params();
            (r.name(), a, e1, e2)
        })
        .collect()
}

/// Runs the simulator on a scenario text and returns its outputs:
/// `events` (JSON lines), `metrics` (CSV), `network` (a View) and counts.
#[pyfunction]
#[pyo3(signature = (config="", seed=None))]
fn simulate<'py>(py: Python<'py>, config: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
    let mut sc = Scenario::parse(config).map_err(err)?;
    if let Some(s) = seed {
        sc = sc.with_seed(s);
    }
    let trace = py.detach(|| simulator::run(sc.sim)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("events", trace.events_jsonl())?;
    out.set_item("metrics", trace.metrics_csv())?;
    out.set_item("honest_attestations", trace.honest_attestations)?;
    out.set_item("honest_offenders", trace.honest_offenders.iter().map(|v| v.0).collect::<Vec<_>>())?;
    out.set_item("network", Py::new(py, PyView { inner: trace.network })?)?;
    Ok(out)
}

#[pymodule]
fn gasperlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyView>()?;
    m.add_function(wrap_pyfunction!(genesis, m)?)?;
    m.add_function(wrap_pyfunction!(no_finalization_prob, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    m.add_function(wrap_pyfunction!(justification_event_bound, m)?)?;
    m.add_function(wrap_pyfunction!(dynamic_safety_bound, m)?)?;
    m.add_function(wrap_pyfunction!(equiv_game_win_rate, m)?)?;
    m.add_function(wrap_pyfunction!(regimes, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
