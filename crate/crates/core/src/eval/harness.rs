use crate::corpus::Vocabulary;
use crate::embeddings::{BiasFilterSpec, CaseMode, EmbeddingMatrix, StaticAvgEncoder};
use crate::error::{Error, Result};
use crate::model::{init_model, ModelConfig, ModelParams};
use crate::prompt::PromptEncoder;
use crate::training::{train, DevSet, Objective, TrainConfig};

use super::report::{mean, EvalReport, ReportRow, SeedStats};
use super::sts::eval_sts;
use super::StsPair;

/// A named list of STS pairs.
pub type StsSet = (String, Vec<StsPair>);

/// none → Freq → Freq+Sub → Freq+Sub+Case → Freq+Sub+Case+Pun.
pub fn cumulative_ladder(top_freq_count: usize, case_mode: CaseMode) -> Vec<BiasFilterSpec> {
    let freq = BiasFilterSpec { top_freq_count, ..BiasFilterSpec::NONE };
    let sub = BiasFilterSpec { remove_subwords: true, ..freq };
    let case = BiasFilterSpec { case_mode, ..sub };
    let pun = BiasFilterSpec { remove_punctuation: true, ..case };
    vec![BiasFilterSpec::NONE, freq, sub, case, pun]
}

/// Static-average STS Spearman under each filter of `ladder`; an empty
/// ladder evaluates the unfiltered encoder only.
pub fn run_bias_ablation(matrix: &EmbeddingMatrix, sets: &[StsSet], ladder: &[BiasFilterSpec]) -> Result<EvalReport> {
    if sets.is_empty() {
        return Err(Error::invalid("no STS sets given"));
    }
    let unfiltered = [BiasFilterSpec::NONE];
    let ladder = if ladder.is_empty() { &unfiltered[..] } else { ladder };
    let mut report = EvalReport::new("filter", sets.iter().map(|(n, _)| n.clone()).collect());
    for spec in ladder {
        let encoder = StaticAvgEncoder::new(matrix, spec);
        let scores = sets.iter().map(|(_, pairs)| eval_sts(&encoder, pairs)).collect::<Result<Vec<_>>>()?;
        report.rows.push(ReportRow::new(spec.to_string(), scores));
    }
    Ok(report)
}

/// Everything shared by the runs of an objective comparison.
pub struct ObjectiveExperiment<'a> {
    /// Starting encoder; when absent each seed initializes `model` afresh.
    pub initial: Option<&'a ModelParams>,
    pub model: ModelConfig,
    /// Objective and seed are overridden per run.
    pub train: TrainConfig,
    pub vocab: &'a Vocabulary,
    pub sentences: &'a [Vec<u32>],
    pub dev: Option<&'a DevSet>,
    pub eval_sets: &'a [StsSet],
}

impl ObjectiveExperiment<'_> {
    /// Trains one objective with one seed and scores every evaluation set
    /// with the first template and no denoising.
    pub fn run(&self, objective: Objective, seed: u64) -> Result<Vec<f64>> {
        let params = match self.initial {
            Some(p) => p.clone(),
            None => init_model(&ModelConfig { seed, ..self.model.clone() })?,
        };
        let config = TrainConfig { objective, seed, ..self.train.clone() };
        let trained = train(params, self.sentences, self.dev, &config)?.params;
        let encoder = PromptEncoder::new(&trained, self.vocab, &config.templates[0]);
        self.eval_sets.iter().map(|(_, pairs)| eval_sts(&encoder, pairs)).collect()
    }
}

/// Trains all three objectives for every seed. A failing run is recorded
/// in its row and excluded from the statistics.
pub fn run_objective_comparison(exp: &ObjectiveExperiment, seeds: &[u64]) -> Result<EvalReport> {
    if seeds.len() < 2 {
        return Err(Error::invalid("an objective comparison needs at least two seeds"));
    }
    if exp.eval_sets.is_empty() {
        return Err(Error::invalid("no evaluation sets given"));
    }
    let mut report = EvalReport::new("objective", exp.eval_sets.iter().map(|(n, _)| n.clone()).collect());
    for objective in Objective::ALL {
        let mut per_seed = Vec::new();
        let mut failures = Vec::new();
        for &seed in seeds {
            match exp.run(objective, seed) {
                Ok(scores) => per_seed.push(scores),
                Err(e) => failures.push(format!("{seed}: {e}")),
            }
        }
        let per_dataset: Vec<f64> = (0..exp.eval_sets.len())
            .map(|d| mean(&per_seed.iter().map(|s| s[d]).collect::<Vec<_>>()))
            .collect();
        let mut row = ReportRow::new(objective.name(), per_dataset);
        let averages: Vec<f64> = per_seed.iter().map(|s| mean(s)).collect();
        row.seeds = SeedStats::from_values(&averages).ok();
        row.failures = failures;
        report.rows.push(row);
    }
    Ok(report)
}
