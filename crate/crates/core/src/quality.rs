//! Dataset-quality metrics over an annotation corpus: information density,
//! value diversity, trend diversity and label regularity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::annotation::{format_number, AxisKind, ChartAnnotation};
use crate::error::{Error, Result};

pub const DEFAULT_PMI_TOP_K: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub chart_count: usize,
    pub avg_points_per_chart: f64,
    pub unique_numerical_ratio: f64,
    /// `None` when no chart has two series sharing three aligned points.
    pub avg_abs_correlation: Option<f64>,
    /// `None` when no label pair co-occurs anywhere.
    pub avg_pmi_top_k: Option<f64>,
    pub k_requested: usize,
    pub k_used: usize,
    pub log_base: String,
}

pub fn avg_points(corpus: &[ChartAnnotation]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let total: usize = corpus.iter().map(|c| c.point_count()).sum();
    Ok(total as f64 / corpus.len() as f64)
}

/// Unique values over all y values and numeric x values, compared by their
/// canonical decimal rendering.
pub fn unique_numerical_ratio(corpus: &[ChartAnnotation]) -> Result<f64> {
    let mut seen = BTreeSet::new();
    let mut total = 0usize;
    for chart in corpus {
        for s in &chart.series {
            for p in &s.points {
                seen.insert(format_number(p.y));
                total += 1;
                if chart.x_axis.kind == AxisKind::Numeric {
                    if let Some(x) = p.x {
                        seen.insert(format_number(x));
                        total += 1;
                    }
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::Empty("numerical values"));
    }
    Ok(seen.len() as f64 / total as f64)
}

/// Pearson correlation; `None` for fewer than two points or a constant side.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

fn align_key(chart: &ChartAnnotation, category: &Option<String>, x: Option<f64>) -> Option<String> {
    match chart.x_axis.kind {
        AxisKind::Categorical => category.clone(),
        AxisKind::Numeric => x.map(format_number),
    }
}

/// |Pearson r| of every eligible series pair in one chart.
pub fn chart_pair_correlations(chart: &ChartAnnotation) -> Vec<f64> {
    let maps: Vec<BTreeMap<String, f64>> = chart
        .series
        .iter()
        .map(|s| {
            let mut m = BTreeMap::new();
            for p in &s.points {
                if let Some(k) = align_key(chart, &p.category, p.x) {
                    m.entry(k).or_insert(p.y);
                }
            }
            m
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..maps.len() {
        for j in i + 1..maps.len() {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (k, va) in &maps[i] {
                if let Some(vb) = maps[j].get(k) {
                    a.push(*va);
                    b.push(*vb);
                }
            }
            if a.len() >= 3 {
                if let Some(r) = pearson(&a, &b) {
                    out.push(r.abs());
                }
            }
        }
    }
    out
}

/// Mean |Pearson r| over all aligned series pairs in the corpus.
pub fn avg_abs_correlation(corpus: &[ChartAnnotation]) -> Option<f64> {
    let all: Vec<f64> = corpus.iter().flat_map(chart_pair_correlations).collect();
    (!all.is_empty()).then(|| all.iter().sum::<f64>() / all.len() as f64)
}

/// Series labels and categorical x labels of one chart, deduplicated.
pub fn chart_labels(chart: &ChartAnnotation) -> BTreeSet<String> {
    let mut labels: BTreeSet<String> = chart.series.iter().map(|s| s.label.clone()).collect();
    if chart.x_axis.kind == AxisKind::Categorical {
        if let Some(cats) = &chart.x_axis.categories {
            labels.extend(cats.iter().cloned());
        }
    }
    labels
}

/// Mean natural-log PMI of the `k` most frequently co-occurring label pairs.
/// Returns the mean and the number of pairs used. Ties in co-occurrence count
/// break by label order.
pub fn avg_pmi_top_k(corpus: &[ChartAnnotation], k: usize) -> Result<(f64, usize)> {
    let mut ids: BTreeMap<String, u32> = BTreeMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut doc_freq: Vec<u64> = Vec::new();
    let mut pairs: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for chart in corpus {
        let labels: Vec<u32> = chart_labels(chart)
            .into_iter()
            .map(|l| {
                *ids.entry(l.clone()).or_insert_with(|| {
                    names.push(l);
                    doc_freq.push(0);
                    (names.len() - 1) as u32
                })
            })
            .collect();
        for &a in &labels {
            doc_freq[a as usize] += 1;
        }
        for (i, &a) in labels.iter().enumerate() {
            for &b in &labels[i + 1..] {
                let key = if names[a as usize] < names[b as usize] {
                    (a, b)
                } else {
                    (b, a)
                };
                *pairs.entry(key).or_insert(0) += 1;
            }
        }
    }
    if pairs.is_empty() || k == 0 {
        return Err(Error::Empty("co-occurring label pairs"));
    }
    let mut ranked: Vec<((u32, u32), u64)> = pairs.into_iter().collect();
    ranked.sort_by(|(ka, ca), (kb, cb)| {
        cb.cmp(ca).then_with(|| {
            (&names[ka.0 as usize], &names[ka.1 as usize]).cmp(&(&names[kb.0 as usize], &names[kb.1 as usize]))
        })
    });
    let used = k.min(ranked.len());
    let n = corpus.len() as f64;
    let sum: f64 = ranked[..used]
        .iter()
        .map(|((a, b), c)| {
            let pab = *c as f64 / n;
            let pa = doc_freq[*a as usize] as f64 / n;
            let pb = doc_freq[*b as usize] as f64 / n;
            libm::log(pab / (pa * pb))
        })
        .sum();
    Ok((sum / used as f64, used))
}

pub fn corpus_stats(corpus: &[ChartAnnotation], k: usize) -> Result<CorpusStats> {
    let pmi = match avg_pmi_top_k(corpus, k) {
        Ok(v) => Some(v),
        Err(Error::Empty(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(CorpusStats {
        chart_count: corpus.len(),
        avg_points_per_chart: avg_points(corpus)?,
        unique_numerical_ratio: unique_numerical_ratio(corpus)?,
        avg_abs_correlation: avg_abs_correlation(corpus),
        avg_pmi_top_k: pmi.map(|p| p.0),
        k_requested: k,
        k_used: pmi.map_or(0, |p| p.1),
        log_base: "e".into(),
    })
}
