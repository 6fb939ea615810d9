use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use crate::likelihood::DataMatrix;
use crate::mcmc::config::McmcConfig;
use crate::mcmc::sampler::{AcceptanceCounts, ChainState, Sampler};
use crate::random::{self, ChainRng};

/// One line of the sample log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub iteration: usize,
    pub k: usize,
    pub alpha: f64,
    pub sigma_x: f64,
    pub sigma_w: f64,
    pub log_joint: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<Vec<u8>>>,
}

impl SampleRecord {
    fn of(iteration: usize, state: &ChainState, with_z: bool) -> Self {
        Self {
            iteration,
            k: state.z.active_columns().len(),
            alpha: state.alpha,
            sigma_x: state.noise.sigma_x,
            sigma_w: state.noise.sigma_w,
            log_joint: state.log_joint,
            z: with_z.then(|| rows_u8(&state.z)),
        }
    }
}

fn rows_u8(z: &FeatureMatrix) -> Vec<Vec<u8>> {
    z.rows()
        .into_iter()
        .map(|r| r.into_iter().map(u8::from).collect())
        .collect()
}

/// Append-only destination for sample records.
pub trait RecordSink {
    fn record(&mut self, r: &SampleRecord) -> Result<()>;
}

impl RecordSink for Vec<SampleRecord> {
    fn record(&mut self, r: &SampleRecord) -> Result<()> {
        self.push(r.clone());
        Ok(())
    }
}

/// Writes one JSON object per line.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RecordSink for JsonLinesSink<W> {
    fn record(&mut self, r: &SampleRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, r)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

pub fn read_json_lines(path: &Path) -> Result<Vec<SampleRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub records: Vec<SampleRecord>,
    /// Highest log-joint state visited, the initial state included.
    pub map: ChainState,
    /// Sweep that produced `map`; `None` for the initial state.
    pub map_iteration: Option<usize>,
    pub last: ChainState,
    pub acceptance: AcceptanceCounts,
    /// Generator state after the final sweep, for checkpointing.
    pub rng: ChainRng,
}

impl ChainOutput {
    pub fn trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.log_joint).collect()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            state: self.last.clone(),
            rng: self.rng.clone(),
            completed: self.records.last().map_or(0, |r| r.iteration + 1),
            acceptance: self.acceptance,
        }
    }
}

/// Everything needed to continue a chain bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub state: ChainState,
    pub rng: ChainRng,
    pub completed: usize,
    pub acceptance: AcceptanceCounts,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

impl Sampler {
    pub fn run(&self, data: Option<DataMatrix>) -> Result<ChainOutput> {
        let mut sink = Vec::new();
        self.run_with_sink(data, &mut sink)
    }

    pub fn run_with_sink(&self, data: Option<DataMatrix>, sink: &mut dyn RecordSink) -> Result<ChainOutput> {
        let mut rng = random::seeded(self.config().seed);
        let state = self.initial_state(data, &mut rng)?;
        self.continue_from(state, rng, 0, self.config().iterations, AcceptanceCounts::default(), sink)
    }

    /// Runs `extra` more sweeps from a checkpoint.
    pub fn resume(&self, checkpoint: Checkpoint, extra: usize, sink: &mut dyn RecordSink) -> Result<ChainOutput> {
        self.continue_from(
            checkpoint.state,
            checkpoint.rng,
            checkpoint.completed,
            extra,
            checkpoint.acceptance,
            sink,
        )
    }

    fn continue_from(
        &self,
        mut state: ChainState,
        mut rng: ChainRng,
        start: usize,
        sweeps: usize,
        mut acceptance: AcceptanceCounts,
        sink: &mut dyn RecordSink,
    ) -> Result<ChainOutput> {
        let mut records = Vec::with_capacity(sweeps);
        let mut map = state.clone();
        let mut map_iteration = None;
        for it in start..start + sweeps {
            self.sweep(&mut state, &mut rng, &mut acceptance)?;
            let rec = SampleRecord::of(it, &state, self.config().record_features);
            sink.record(&rec)?;
            records.push(rec);
            if state.log_joint > map.log_joint {
                map = state.clone();
                map_iteration = Some(it);
            }
        }
        Ok(ChainOutput {
            records,
            map,
            map_iteration,
            last: state,
            acceptance,
            rng,
        })
    }
}

/// Builds the proximity matrix from `distances` and `decay` and runs one
/// chain. `data = None` samples under a flat likelihood.
pub fn run_chain(
    data: Option<DataMatrix>,
    distances: &DistanceMatrix,
    decay: &DecayFunction,
    config: &McmcConfig,
) -> Result<ChainOutput> {
    let proximity = ProximityMatrix::build(distances, decay)?;
    Sampler::new(proximity, config.clone())?.run(data)
}
