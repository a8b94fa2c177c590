//! End-to-end train and track runs over a scenario.
//!
//! Every random draw comes from [`stream_rng`]: channel and noise streams are
//! keyed by the scenario seed, network initialization and shuffling by the
//! training seed, so retraining never perturbs the evaluation channels.

use crate::error::{Error, Result};
use crate::particle_filter::PfConfig;
use crate::rnn::{train, RnnNetwork, TrainConfig, TrainReport};
use crate::scenario::{eval_realizations, stream_rng, training_dataset, ScenarioConfig, Stream};
use crate::tracking::{
    default_segments, evaluate, track_oracle, track_pf, track_rnn, TrackResult, TrackerKind, TrackerSummary,
};

/// Trains a fresh network on the scenario's training trajectory.
pub fn train_model(scenario: &ScenarioConfig, cfg: &TrainConfig) -> Result<(RnnNetwork, TrainReport)> {
    let data = training_dataset(scenario)?;
    let mut rng = stream_rng(cfg.seed, Stream::NetworkInit, 0, 0);
    let net = RnnNetwork::for_window(scenario.half_width, cfg.hidden_dim, &mut rng);
    let mut rng = stream_rng(cfg.seed, Stream::Training, 0, 0);
    train(net, &data, cfg, &mut rng)
}

/// Runs Oracle and PF, plus the RNN when a model is given, on every
/// evaluation realization. Rows are `(realization, result)`.
pub fn track_all(
    scenario: &ScenarioConfig,
    pf: &PfConfig,
    model: Option<(&RnnNetwork, usize)>,
) -> Result<Vec<(usize, TrackResult)>> {
    scenario.validate()?;
    pf.validate()?;
    let cb = scenario.codebook()?;
    let mut rows = Vec::new();
    for real in eval_realizations(scenario)? {
        let rng = |kind: TrackerKind| stream_rng(scenario.seed, Stream::Tracking, real.index as u64, kind.id());
        rows.push((real.index, track_oracle(&real, &cb, scenario)?));
        rows.push((
            real.index,
            track_pf(&real, &cb, pf, scenario, &mut rng(TrackerKind::Pf))?,
        ));
        if let Some((net, context_len)) = model {
            rows.push((
                real.index,
                track_rnn(&real, &cb, net, scenario, context_len, &mut rng(TrackerKind::Rnn))?,
            ));
        }
    }
    Ok(rows)
}

/// One summary per tracker present in `rows`, in Oracle, PF, RNN order.
pub fn summarize(rows: &[(usize, TrackResult)]) -> Result<Vec<TrackerSummary>> {
    let mut out = Vec::new();
    for kind in [TrackerKind::Oracle, TrackerKind::Pf, TrackerKind::Rnn] {
        let runs: Vec<&TrackResult> = rows.iter().map(|(_, r)| r).filter(|r| r.tracker == kind).collect();
        if let Some(first) = runs.first() {
            out.push(evaluate(&runs, &default_segments(first.len()))?);
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("tracks"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_scenario() -> ScenarioConfig {
        ScenarioConfig {
            realizations: 2,
            train_realizations: 1,
            half_width: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn tracks_cover_every_realization_and_tracker() {
        let sc = small_scenario();
        let cfg = TrainConfig {
            epochs: 1,
            hidden_dim: 4,
            ..TrainConfig::default()
        };
        let (net, report) = train_model(&sc, &cfg).unwrap();
        assert_eq!(report.epoch_losses.len(), 1);
        let rows = track_all(&sc, &PfConfig::default(), Some((&net, cfg.context_len))).unwrap();
        assert_eq!(rows.len(), 6);
        let summaries = summarize(&rows).unwrap();
        let kinds: Vec<_> = summaries.iter().map(|s| s.tracker).collect();
        assert_eq!(kinds, [TrackerKind::Oracle, TrackerKind::Pf, TrackerKind::Rnn]);
        assert!(summaries.iter().all(|s| s.runs == 2));
    }

    #[test]
    fn model_window_must_match_scenario() {
        let sc = small_scenario();
        let net = RnnNetwork::for_window(5, 4, &mut stream_rng(0, Stream::NetworkInit, 0, 0));
        assert!(track_all(&sc, &PfConfig::default(), Some((&net, 8))).is_err());
        let rows = track_all(&sc, &PfConfig::default(), None).unwrap();
        assert_eq!(summarize(&rows).unwrap().len(), 2);
    }
}
