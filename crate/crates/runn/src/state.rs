//! On-disk form of an [`UzawaState`].
//!
//! A state directory holds `state.json` (formulation, per-component network
//! spec, role, step scale and parameter file name, per-phase summaries), one
//! `component_<k>.txt` per component and `history.csv` with the per-epoch log.
//!
//! Parameter files list one number per line in the order `kappa`, `w_spatial`,
//! `b_spatial`, then `weights` (row-major) and `bias` of each hidden layer, then
//! `w_out`. Numbers are written in shortest round-trip form, so a reload is
//! exact.

use std::fmt::Write as _;
use std::path::Path;

use runn_core::diffnet::{HiddenLayer, NetworkParams, NetworkSpec};
use runn_core::formulations::Formulation;
use runn_core::spectral::{InitPlan, Phase};
use runn_core::trainer::EpochRecord;
use runn_core::uzawa::{Component, PhaseRecord, Role, UzawaState};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, ConvergenceRow};
use crate::Error;

#[derive(Debug, Serialize, Deserialize)]
struct ComponentEntry {
    file: String,
    role: Role,
    scale: f64,
    spec: NetworkSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct PhaseEntry {
    phase: usize,
    plan: InitPlan,
    epochs: usize,
    final_loss: f64,
    relative_error: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    formulation: Formulation,
    failure: Option<String>,
    components: Vec<ComponentEntry>,
    phases: Vec<PhaseEntry>,
}

fn flatten(p: &NetworkParams) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend(&p.kappa);
    v.extend(&p.w_spatial);
    v.extend(&p.b_spatial);
    for l in &p.hidden {
        v.extend(&l.weights);
        v.extend(&l.bias);
    }
    v.extend(&p.w_out);
    v
}

fn unflatten(spec: &NetworkSpec, v: &[f64]) -> Result<NetworkParams, Error> {
    let n = spec.width;
    let want = 4 * n + (spec.depth - 1) * (n * n + n);
    if v.len() != want {
        return Err(Error::Format(format!("expected {want} parameters, found {}", v.len())));
    }
    let mut it = v.iter().copied();
    let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
    let kappa = take(n);
    let w_spatial = take(n);
    let b_spatial = take(n);
    let hidden = (1..spec.depth)
        .map(|_| HiddenLayer {
            weights: take(n * n),
            bias: take(n),
        })
        .collect();
    let w_out = take(n);
    Ok(NetworkParams {
        kappa,
        w_spatial,
        b_spatial,
        hidden,
        w_out,
    })
}

pub fn save_state(state: &UzawaState, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let mut components = Vec::new();
    for (k, c) in state.components.iter().enumerate() {
        let file = format!("component_{k}.txt");
        let mut text = String::new();
        for v in flatten(&c.params) {
            writeln!(text, "{v:e}").expect("writing to a string");
        }
        std::fs::write(dir.join(&file), text)?;
        components.push(ComponentEntry {
            file,
            role: c.role,
            scale: c.scale,
            spec: c.spec,
        });
    }
    let phases = state
        .history
        .iter()
        .map(|h| PhaseEntry {
            phase: h.phase.index(),
            plan: h.plan,
            epochs: h.epochs,
            final_loss: h.final_loss,
            relative_error: h.relative_error,
        })
        .collect();
    artifacts::write_json(
        &dir.join("state.json"),
        &StateFile {
            formulation: state.formulation,
            failure: state.failure.clone(),
            components,
            phases,
        },
    )?;
    artifacts::write_convergence(&dir.join("history.csv"), state)
}

/// Reads a state directory. Spectra are not stored, so `spectrum` is `None`.
pub fn load_state(dir: &Path) -> Result<UzawaState, Error> {
    let file: StateFile = serde_json::from_str(&std::fs::read_to_string(dir.join("state.json"))?)?;
    let mut components = Vec::new();
    for c in file.components {
        let text = std::fs::read_to_string(dir.join(&c.file))?;
        let values = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{}: {e}", c.file)))?;
        let params = unflatten(&c.spec, &values)?;
        params.check(&c.spec)?;
        components.push(Component {
            spec: c.spec,
            params,
            scale: c.scale,
            role: c.role,
        });
    }
    let mut rdr = csv::Reader::from_path(dir.join("history.csv"))?;
    let rows: Vec<ConvergenceRow> = rdr.deserialize().collect::<Result<_, _>>()?;
    let mut history = Vec::new();
    let mut offset = 0;
    for p in file.phases {
        let epochs: Vec<EpochRecord> = rows
            .iter()
            .filter(|r| r.phase == p.phase)
            .map(|r| EpochRecord {
                epoch: r.epoch - offset,
                loss: r.loss,
                relative_error: r.relative_error,
            })
            .collect();
        offset += epochs.len();
        history.push(PhaseRecord {
            phase: Phase::from_index(p.phase),
            plan: p.plan,
            spectrum: None,
            epochs: p.epochs,
            history: epochs,
            final_loss: p.final_loss,
            relative_error: p.relative_error,
        });
    }
    Ok(UzawaState {
        formulation: file.formulation,
        components,
        history,
        failure: file.failure,
    })
}
