use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, GenEvalError, Generation, Label};

/// Annotator id reserved for adjudication records.
pub const ADJUDICATOR_ID: &str = "adjudicator";

/// How one label per generation is chosen when several annotators judged it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Use the annotator whose id sorts first.
    FirstAnnotator,
    /// Agreement wins; disagreements need an adjudicator record, otherwise
    /// the item is unresolved.
    #[default]
    Adjudicated,
}

impl std::str::FromStr for Resolution {
    type Err = GenEvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first_annotator" => Ok(Self::FirstAnnotator),
            "adjudicated" => Ok(Self::Adjudicated),
            other => Err(GenEvalError::Config(format!("unknown resolution {other:?}"))),
        }
    }
}

/// Label shares for one (aspect, model) group, in percent of `counted`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBreakdown {
    pub aspect_id: String,
    pub model_id: String,
    pub total: usize,
    /// Items with a resolved label; the percentages cover exactly these.
    pub counted: usize,
    pub unresolved: usize,
    pub unlabeled: usize,
    pub arab: f64,
    pub western: f64,
    pub neutral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub resolution: Resolution,
    pub groups: Vec<LabelBreakdown>,
}

enum Outcome {
    Resolved(Label),
    Unresolved,
    Unlabeled,
}

fn resolve(records: &[&AnnotationRecord], resolution: Resolution) -> Outcome {
    let (adjudicated, regular): (Vec<&AnnotationRecord>, Vec<&AnnotationRecord>) =
        records.iter().copied().partition(|r| r.annotator_id == ADJUDICATOR_ID);
    match resolution {
        Resolution::FirstAnnotator => match regular.iter().min_by(|a, b| a.annotator_id.cmp(&b.annotator_id)) {
            Some(r) => Outcome::Resolved(r.label),
            None => Outcome::Unlabeled,
        },
        Resolution::Adjudicated => {
            if let Some(r) = adjudicated.first() {
                return Outcome::Resolved(r.label);
            }
            let labels: BTreeSet<Label> = regular.iter().map(|r| r.label).collect();
            match labels.len() {
                0 => Outcome::Unlabeled,
                1 => Outcome::Resolved(*labels.iter().next().expect("one label")),
                _ => Outcome::Unresolved,
            }
        }
    }
}

/// Percentage of Arab, Western and Neutral labels per aspect and model.
/// `records` must hold at most one record per (generation, annotator).
pub fn aggregate_labels(
    generations: &[Generation],
    records: &[AnnotationRecord],
    resolution: Resolution,
) -> Result<LabelReport, GenEvalError> {
    let known: HashMap<&str, &Generation> = generations.iter().map(|g| (g.id.as_str(), g)).collect();
    let mut by_generation: HashMap<&str, Vec<&AnnotationRecord>> = HashMap::new();
    for r in records {
        if !known.contains_key(r.generation_id.as_str()) {
            return Err(GenEvalError::DanglingGeneration(r.generation_id.clone()));
        }
        by_generation.entry(r.generation_id.as_str()).or_default().push(r);
    }

    #[derive(Default)]
    struct Tally {
        total: usize,
        unresolved: usize,
        unlabeled: usize,
        counts: [usize; 3],
    }
    let mut groups: BTreeMap<(&str, &str), Tally> = BTreeMap::new();
    for g in generations {
        let tally = groups.entry((g.aspect_id.as_str(), g.model_id.as_str())).or_default();
        tally.total += 1;
        let recs = by_generation.get(g.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        match resolve(recs, resolution) {
            Outcome::Resolved(label) => tally.counts[label.index()] += 1,
            Outcome::Unresolved => tally.unresolved += 1,
            Outcome::Unlabeled => tally.unlabeled += 1,
        }
    }
    let groups = groups
        .into_iter()
        .map(|((aspect, model), t)| {
            let counted: usize = t.counts.iter().sum();
            let pct = |c: usize| if counted == 0 { 0.0 } else { c as f64 * 100.0 / counted as f64 };
            LabelBreakdown {
                aspect_id: aspect.to_string(),
                model_id: model.to_string(),
                total: t.total,
                counted,
                unresolved: t.unresolved,
                unlabeled: t.unlabeled,
                arab: pct(t.counts[0]),
                western: pct(t.counts[1]),
                neutral: pct(t.counts[2]),
            }
        })
        .collect();
    Ok(LabelReport { resolution, groups })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub p_o: f64,
    pub p_e: f64,
    pub kappa: f64,
    pub n_items: usize,
    /// True when expected agreement is 1 and kappa was fixed by convention
    /// (1 for perfect agreement, 0 otherwise).
    pub convention_applied: bool,
}

/// Two-rater Cohen's kappa over the three labels. Computed from integer
/// counts so each reported value is the nearest double to the exact ratio.
pub fn cohen_kappa(labels_a: &[Label], labels_b: &[Label]) -> Result<AgreementStats, GenEvalError> {
    if labels_a.len() != labels_b.len() {
        return Err(GenEvalError::LengthMismatch(labels_a.len(), labels_b.len()));
    }
    if labels_a.is_empty() {
        return Err(GenEvalError::EmptyLabels);
    }
    let n = labels_a.len() as u128;
    let mut ca = [0u128; 3];
    let mut cb = [0u128; 3];
    let mut agree = 0u128;
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        ca[a.index()] += 1;
        cb[b.index()] += 1;
        agree += u128::from(a == b);
    }
    let chance: u128 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
    let n2 = n * n;
    let p_o = agree as f64 / n as f64;
    let p_e = chance as f64 / n2 as f64;
    let (kappa, convention_applied) = if chance == n2 {
        (if agree == n { 1.0 } else { 0.0 }, true)
    } else {
        // (p_o - p_e) / (1 - p_e) with the n^2 denominators cleared.
        let num = (agree * n) as f64 - chance as f64;
        (num / (n2 - chance) as f64, false)
    };
    Ok(AgreementStats {
        p_o,
        p_e,
        kappa,
        n_items: labels_a.len(),
        convention_applied,
    })
}

/// Kappa between two annotators over the generations both labeled, in
/// generation id order. `None` when they share no items.
pub fn kappa_between(
    records: &[AnnotationRecord],
    annotator_a: &str,
    annotator_b: &str,
) -> Result<Option<AgreementStats>, GenEvalError> {
    let of = |who: &str| -> BTreeMap<&str, Label> {
        records
            .iter()
            .filter(|r| r.annotator_id == who)
            .map(|r| (r.generation_id.as_str(), r.label))
            .collect()
    };
    let (a, b) = (of(annotator_a), of(annotator_b));
    let (la, lb): (Vec<Label>, Vec<Label>) = a
        .iter()
        .filter_map(|(id, &la)| b.get(id).map(|&lb| (la, lb)))
        .unzip();
    if la.is_empty() {
        return Ok(None);
    }
    cohen_kappa(&la, &lb).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseKappa {
    pub annotator_a: String,
    pub annotator_b: String,
    pub stats: AgreementStats,
}

/// Kappa for every pair of regular annotators with overlapping items.
pub fn pairwise_kappa(records: &[AnnotationRecord]) -> Result<Vec<PairwiseKappa>, GenEvalError> {
    let annotators: BTreeSet<&str> = records
        .iter()
        .map(|r| r.annotator_id.as_str())
        .filter(|a| *a != ADJUDICATOR_ID)
        .collect();
    let annotators: Vec<&str> = annotators.into_iter().collect();
    let mut out = Vec::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            if let Some(stats) = kappa_between(records, a, b)? {
                out.push(PairwiseKappa {
                    annotator_a: a.to_string(),
                    annotator_b: b.to_string(),
                    stats,
                });
            }
        }
    }
    Ok(out)
}
