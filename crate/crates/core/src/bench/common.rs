use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{bootstrap, fairness_gaps, BootstrapConfig, Ensemble, Estimate, ScoredSet, Subset};
use crate::trainers::TrainedEnsemble;

/// Fold-model scores on the test rows.
pub(crate) fn test_ensemble(dataset: &Dataset, trained: &TrainedEnsemble) -> Result<Ensemble> {
    let idx = dataset.test_indices();
    if idx.is_empty() {
        return Err(Error::data("the dataset has no test rows"));
    }
    let s = dataset.samples();
    let template = ScoredSet::new(
        vec![0.5; idx.len()],
        idx.iter().map(|&i| s[i].label).collect(),
        idx.iter().map(|&i| s[i].group).collect(),
        dataset.n_groups(),
    )?;
    Ensemble::from_scores(&template, trained.scores(dataset, &idx)?)
}

/// Group subsets with their names, then the whole set as `ALL`.
pub(crate) fn subsets(names: &[String]) -> Vec<(Subset, String)> {
    let mut v: Vec<(Subset, String)> = names.iter().enumerate().map(|(g, n)| (Subset::Group(g), n.clone())).collect();
    v.push((Subset::All, crate::metrics::ALL_GROUPS.to_owned()));
    v
}

pub(crate) const PROB_EO: &str = "prob_equalized_odds";

/// Bootstrap of every fairness gap, including the combined probabilistic
/// equalized-odds gap. Undefined gaps are left out.
pub(crate) fn gap_estimates(ens: &Ensemble, tau: f64, cfg: &BootstrapConfig) -> Result<Vec<(&'static str, Estimate)>> {
    let undefined = |gap: &str| Error::UndefinedMetric {
        metric: gap.to_owned(),
        subset: "groups".into(),
        reason: "a group has an empty cell".into(),
    };
    let names: Vec<&'static str> = fairness_gaps(&ens.members()[0], tau)?
        .entries()
        .iter()
        .map(|(n, _)| *n)
        .chain([PROB_EO])
        .collect();
    let mut out = Vec::new();
    for (k, name) in names.into_iter().enumerate() {
        let est = bootstrap(
            |s| {
                let t = fairness_gaps(s, tau)?;
                let v = if name == PROB_EO { t.prob_equalized_odds() } else { t.entries()[k].1 };
                v.ok_or_else(|| undefined(name))
            },
            ens,
            cfg,
        );
        match est {
            Ok(e) => out.push((name, e)),
            Err(e) if e.is_metric() => log::warn!("gap {name} is undefined: {e}"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serialises rows with a header into CSV text.
pub(crate) fn csv_text<R: AsRef<[String]>>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    w.into_inner().map_err(|e| Error::data(format!("csv writer: {e}")))
}

pub(crate) fn json_text<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub(crate) fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}
