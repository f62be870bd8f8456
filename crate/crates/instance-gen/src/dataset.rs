//! Expert datasets: construction from the goal samplers and the on-disk
//! format.
//!
//! File format: a header line
//! `# gridlu-dataset v1 task=<task> seed=<u64> count=<n>`
//! followed by one example per line: instruction text, TAB, serialized
//! world state. UTF-8 with LF endings; round-trips bit-exactly. Every
//! example is verified against the ground-truth checker at load time.

use crate::{sample_arrangements_instance, sample_relations_goal, Task};
use gridlu_env::WorldState;
use instruction_lang::{parse, Instruction};
use rand::Rng;
use reward_semantics::{sample_arrangement_goal, success, TemplateSet};
use std::fs;
use std::path::Path;
use thiserror::Error;

/// An (instruction, goal state) supervision pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertExample {
    pub instruction: Instruction,
    pub goal: WorldState,
}

/// Where a dataset came from: the generator seed and format version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
}

/// An ordered list of verified expert examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertDataset {
    pub task: Task,
    pub examples: Vec<ExpertExample>,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header line {0:?}")]
    BadHeader(String),
    #[error("line {0}: {1}")]
    BadLine(usize, String),
    #[error("line {0}: example fails the ground-truth checker")]
    FailsCheck(usize),
    #[error("header promises {expected} examples, file has {found}")]
    CountMismatch { expected: usize, found: usize },
}

const FORMAT_VERSION: &str = "v1";

/// Build `n` expert examples i.i.d. from the task's goal distribution.
///
/// Relations: instructions drawn as in instance sampling (joint grammar
/// expansion under the same options), goals constructed for each.
/// Arrangements: instructions drawn as in episode sampling (word and color
/// regime from the instance generator), goals sampled with 4 distractors
/// for 8-block-style episodes and 0 for 4-block-style ones.
pub fn build_dataset(
    task: Task,
    n: usize,
    rng: &mut impl Rng,
    seed: u64,
    opts: &crate::GenOptions,
    templates: &TemplateSet,
) -> ExpertDataset {
    assert!(n >= 1, "datasets need at least one example");
    let mut examples = Vec::with_capacity(n);
    match task {
        Task::Relations => {
            for _ in 0..n {
                let inst = crate::sample_relations_instance(rng, opts);
                let Instruction::Relation(r) = inst.instruction else {
                    unreachable!()
                };
                let goal = sample_relations_goal(&r, rng);
                examples.push(ExpertExample {
                    instruction: inst.instruction,
                    goal,
                });
            }
        }
        Task::Arrangements => {
            let mut guard = 0;
            while examples.len() < n {
                let inst = sample_arrangements_instance(rng);
                if !opts.filter.accepts(&inst.instruction) {
                    guard += 1;
                    assert!(guard < 10_000, "generator fault: filter starves dataset");
                    continue;
                }
                let Instruction::Arrangement(a) = inst.instruction else {
                    unreachable!()
                };
                // Mirror the episode regime: colorless instructions come
                // from 4-block episodes, colored ones from 8-block episodes.
                let n_distractors = if a.color.is_some() { 4 } else { 0 };
                let goal = sample_arrangement_goal(&a, n_distractors, rng, templates)
                    .expect("built-in templates always have placements");
                examples.push(ExpertExample {
                    instruction: inst.instruction,
                    goal,
                });
            }
        }
    }
    ExpertDataset {
        task,
        examples,
        provenance: Provenance {
            seed,
            version: FORMAT_VERSION.to_string(),
        },
    }
}

impl ExpertDataset {
    /// Serialize to the dataset file format.
    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "# gridlu-dataset {} task={} seed={} count={}\n",
            self.provenance.version,
            self.task.name(),
            self.provenance.seed,
            self.examples.len()
        );
        for ex in &self.examples {
            out.push_str(&format!("{}\t{}\n", ex.instruction, ex.goal));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    /// Parse a dataset file, verifying every example against the
    /// ground-truth checker.
    pub fn from_file_string(text: &str, templates: &TemplateSet) -> Result<Self, DatasetError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| DatasetError::BadHeader(String::new()))?;
        let bad_header = || DatasetError::BadHeader(header.to_string());
        let rest = header
            .strip_prefix("# gridlu-dataset ")
            .ok_or_else(bad_header)?;
        let mut fields = rest.split_whitespace();
        let version = fields.next().ok_or_else(bad_header)?.to_string();
        if version != FORMAT_VERSION {
            return Err(bad_header());
        }
        let mut task = None;
        let mut seed = None;
        let mut count = None;
        for field in fields {
            let (key, value) = field.split_once('=').ok_or_else(bad_header)?;
            match key {
                "task" => task = Task::from_name(value),
                "seed" => seed = value.parse::<u64>().ok(),
                "count" => count = value.parse::<usize>().ok(),
                _ => return Err(bad_header()),
            }
        }
        let (task, seed, count) = match (task, seed, count) {
            (Some(t), Some(s), Some(c)) => (t, s, c),
            _ => return Err(bad_header()),
        };
        let mut examples = Vec::with_capacity(count);
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let (instr_text, state_text) = line
                .split_once('\t')
                .ok_or_else(|| DatasetError::BadLine(lineno, "missing TAB".to_string()))?;
            let instruction = parse(instr_text)
                .map_err(|e| DatasetError::BadLine(lineno, e.to_string()))?;
            let goal: WorldState = state_text
                .parse()
                .map_err(|e: gridlu_env::StateParseError| {
                    DatasetError::BadLine(lineno, e.to_string())
                })?;
            if !success(&instruction, &goal, templates) {
                return Err(DatasetError::FailsCheck(lineno));
            }
            examples.push(ExpertExample { instruction, goal });
        }
        if examples.len() != count {
            return Err(DatasetError::CountMismatch {
                expected: count,
                found: examples.len(),
            });
        }
        Ok(ExpertDataset {
            task,
            examples,
            provenance: Provenance { seed, version },
        })
    }

    pub fn load(path: &Path, templates: &TemplateSet) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path)?;
        Self::from_file_string(&text, templates)
    }
}
