//! Per-step trajectory dump for dooming-action analysis.
//!
//! CSV with a header row. Vector-valued fields are `;`-joined inside their
//! column; `critic_scores` and `chosen_index` are empty when selection
//! tracing is off.

use std::io::Write;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub step: usize,
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub fell: bool,
    pub critic_scores: Option<Vec<f64>>,
    pub chosen_index: Option<usize>,
}

#[derive(Serialize)]
struct Row {
    episode: usize,
    step: usize,
    observation: String,
    action: String,
    reward: f64,
    terminal: bool,
    fell: bool,
    critic_scores: String,
    chosen_index: Option<usize>,
}

pub fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(writer: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(writer),
        }
    }

    pub fn write(&mut self, record: &TrajectoryRecord) -> csv::Result<()> {
        self.inner.serialize(Row {
            episode: record.episode,
            step: record.step,
            observation: join(&record.observation),
            action: join(&record.action),
            reward: record.reward,
            terminal: record.terminal,
            fell: record.fell,
            critic_scores: record
                .critic_scores
                .as_deref()
                .map(join)
                .unwrap_or_default(),
            chosen_index: record.chosen_index,
        })
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}
