//! Dataset readers and outcome construction.
//!
//! Three study shapes feed the fitting pipeline: rated word norms
//! (word + per-dimension ratings), a multi-rater emotion corpus (documents
//! with per-rater label sets or precomputed agreement columns), and an
//! item-response bank (Likert items with reverse keys, yielding
//! item-factor correlations as outcomes).

use std::collections::{HashMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Rated word norms, validated against declared scale bounds.
#[derive(Debug, Clone)]
pub struct NormsTable {
    pub words: Vec<String>,
    /// Rating column name -> values aligned with `words`.
    pub columns: IndexMap<String, Vec<f64>>,
    /// Rows rejected for out-of-range or non-finite ratings.
    pub rejected: usize,
    /// Duplicate words dropped (first occurrence kept).
    pub duplicates: usize,
}

/// Declared layout of a norms file.
#[derive(Debug, Clone)]
pub struct NormsSchema {
    pub word_column: String,
    pub rating_columns: Vec<String>,
    pub scale_min: f64,
    pub scale_max: f64,
    pub delimiter: u8,
}

/// Reads a delimited norms file with a header row.
pub fn read_norms(path: impl AsRef<Path>, schema: &NormsSchema) -> Result<NormsTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .from_path(path)
        .map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?
        .clone();
    let col_idx = |name: &str| headers.iter().position(|h| h == name);
    let word_idx = col_idx(&schema.word_column).ok_or_else(|| Error::Schema {
        path: path.into(),
        message: format!("missing declared column {:?}", schema.word_column),
    })?;
    let mut rating_idx = Vec::new();
    for col in &schema.rating_columns {
        rating_idx.push(col_idx(col).ok_or_else(|| Error::Schema {
            path: path.into(),
            message: format!("missing declared column {col:?}"),
        })?);
    }

    let mut words = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut columns: IndexMap<String, Vec<f64>> = schema
        .rating_columns
        .iter()
        .map(|c| (c.clone(), Vec::new()))
        .collect();
    let mut rejected = 0usize;
    let mut duplicates = 0usize;

    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let word = record
            .get(word_idx)
            .ok_or_else(|| Error::parse(path, line, "missing word field"))?
            .trim()
            .to_string();
        let mut ratings = Vec::with_capacity(rating_idx.len());
        for (&idx, col) in rating_idx.iter().zip(&schema.rating_columns) {
            let raw = record
                .get(idx)
                .ok_or_else(|| Error::parse(path, line, format!("missing {col}")))?;
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad rating {raw:?} in {col}")))?;
            ratings.push(v);
        }
        if ratings
            .iter()
            .any(|v| !v.is_finite() || *v < schema.scale_min || *v > schema.scale_max)
        {
            rejected += 1;
            continue;
        }
        if !seen.insert(word.clone()) {
            duplicates += 1;
            continue;
        }
        words.push(word);
        for (col, v) in schema.rating_columns.iter().zip(ratings) {
            columns.get_mut(col).unwrap().push(v);
        }
    }

    Ok(NormsTable {
        words,
        columns,
        rejected,
        duplicates,
    })
}

/// Documents with one agreement outcome per emotion.
#[derive(Debug, Clone)]
pub struct EmotionCorpus {
    pub ids: Vec<String>,
    pub texts: Vec<String>,
    /// Emotion name -> outcome column in [0, 1], aligned with `ids`.
    pub outcomes: IndexMap<String, Vec<f64>>,
    /// Rows dropped for having zero raters.
    pub dropped_rows: usize,
    /// Emotions whose outcome is constant over the corpus (these fail
    /// downstream with a degenerate-outcome error).
    pub constant_warnings: Vec<String>,
}

/// Reads an emotion corpus in either supported layout.
///
/// Layout A has columns `id, text, labels` where the labels cell holds one
/// segment per rater separated by `;`, each segment the rater's
/// pipe-separated emotion names (names outside `emotions` still count the
/// rater in the denominator). Layout B has `id, text` plus one precomputed
/// agreement column per emotion.
pub fn read_emotion_corpus(
    path: impl AsRef<Path>,
    emotions: &[String],
    delimiter: u8,
) -> Result<EmotionCorpus> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_idx = col("id").ok_or_else(|| Error::Schema {
        path: path.into(),
        message: "missing column \"id\"".to_string(),
    })?;
    let text_idx = col("text").ok_or_else(|| Error::Schema {
        path: path.into(),
        message: "missing column \"text\"".to_string(),
    })?;

    let precomputed: Option<Vec<usize>> = emotions
        .iter()
        .map(|e| col(e))
        .collect::<Option<Vec<_>>>();
    let labels_idx = col("labels");
    if precomputed.is_none() && labels_idx.is_none() {
        return Err(Error::Schema {
            path: path.into(),
            message: "need either a \"labels\" column or one agreement column per emotion"
                .to_string(),
        });
    }

    let mut ids = Vec::new();
    let mut texts = Vec::new();
    let mut outcomes: IndexMap<String, Vec<f64>> =
        emotions.iter().map(|e| (e.clone(), Vec::new())).collect();
    let mut dropped_rows = 0usize;

    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let id = record
            .get(id_idx)
            .ok_or_else(|| Error::parse(path, line, "missing id"))?
            .to_string();
        let text = record
            .get(text_idx)
            .ok_or_else(|| Error::parse(path, line, "missing text"))?
            .to_string();

        if let Some(cols) = &precomputed {
            let mut vals = Vec::with_capacity(cols.len());
            for (&c, name) in cols.iter().zip(emotions) {
                let raw = record
                    .get(c)
                    .ok_or_else(|| Error::parse(path, line, format!("missing {name}")))?;
                let v: f64 = raw.trim().parse().map_err(|_| {
                    Error::parse(path, line, format!("bad agreement {raw:?} for {name}"))
                })?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("agreement {v} for {name} outside [0, 1]"),
                    ));
                }
                vals.push(v);
            }
            ids.push(id);
            texts.push(text);
            for (name, v) in emotions.iter().zip(vals) {
                outcomes.get_mut(name).unwrap().push(v);
            }
        } else {
            let labels_raw = record
                .get(labels_idx.unwrap())
                .ok_or_else(|| Error::parse(path, line, "missing labels"))?
                .trim();
            if labels_raw.is_empty() {
                dropped_rows += 1;
                continue;
            }
            let raters: Vec<&str> = labels_raw.split(';').collect();
            let mut counts: HashMap<&str, usize> = HashMap::new();
            for rater in &raters {
                let rater = rater.trim();
                if rater.is_empty() {
                    return Err(Error::parse(
                        path,
                        line,
                        "empty rater segment in labels".to_string(),
                    ));
                }
                for label in rater.split('|') {
                    let label = label.trim();
                    if label.is_empty() {
                        return Err(Error::parse(
                            path,
                            line,
                            "malformed label token in labels".to_string(),
                        ));
                    }
                    *counts.entry(label).or_insert(0) += 1;
                }
            }
            let n_raters = raters.len() as f64;
            ids.push(id);
            texts.push(text);
            for name in emotions {
                let c = counts.get(name.as_str()).copied().unwrap_or(0);
                outcomes
                    .get_mut(name)
                    .unwrap()
                    .push(c as f64 / n_raters);
            }
        }
    }

    let mut constant_warnings = Vec::new();
    for (name, ys) in &outcomes {
        if let (Some(first), true) = (ys.first(), !ys.is_empty()) {
            if ys.iter().all(|v| v == first) {
                constant_warnings.push(name.clone());
            }
        }
    }

    Ok(EmotionCorpus {
        ids,
        texts,
        outcomes,
        dropped_rows,
        constant_warnings,
    })
}

/// Item key direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Keyed {
    Plus,
    Minus,
}

/// One questionnaire item.
#[derive(Debug, Clone)]
pub struct Item {
    pub id: String,
    /// Facet-level scale id as declared (e.g. "N1").
    pub scale: String,
    /// Domain id derived from the scale id by stripping trailing digits
    /// (e.g. "N1" -> "N"); equals the scale id when nothing strips.
    pub domain: String,
    pub keyed: Keyed,
    pub text: String,
}

/// Likert item bank with a participants-by-items response matrix.
#[derive(Debug, Clone)]
pub struct ItemBank {
    pub items: Vec<Item>,
    pub participants: Vec<String>,
    /// Row-major P x I; `None` marks a missing response.
    responses: Vec<Option<u8>>,
    pub scale_min: u8,
    pub scale_max: u8,
    /// Scale id -> item indices: every declared facet, then every derived
    /// domain (union of its facets), in first-seen order.
    pub scales: IndexMap<String, Vec<usize>>,
}

impl ItemBank {
    pub fn response(&self, participant: usize, item: usize) -> Option<u8> {
        self.responses[participant * self.items.len() + item]
    }

    pub fn n_participants(&self) -> usize {
        self.participants.len()
    }

    /// Reverse-coded value for one response given this bank's bounds.
    pub fn recode(&self, keyed: Keyed, response: u8) -> f64 {
        match keyed {
            Keyed::Plus => response as f64,
            Keyed::Minus => (self.scale_min + self.scale_max) as f64 - response as f64,
        }
    }
}

fn derive_domain(scale: &str) -> String {
    let stripped = scale.trim_end_matches(|c: char| c.is_ascii_digit());
    if stripped.is_empty() {
        scale.to_string()
    } else {
        stripped.to_string()
    }
}

/// Loads an item bank from an items file (`id, scale_id, keyed, text`) and
/// a wide responses file (`participant_id, <item id>...`).
pub fn load_item_bank(
    items_path: impl AsRef<Path>,
    responses_path: impl AsRef<Path>,
    scale_min: u8,
    scale_max: u8,
    delimiter: u8,
) -> Result<ItemBank> {
    let items_path = items_path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_path(items_path)
        .map_err(|e| Error::Schema {
            path: items_path.into(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema {
            path: items_path.into(),
            message: e.to_string(),
        })?
        .clone();
    let need = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                path: items_path.into(),
                message: format!("missing column {name:?}"),
            })
    };
    let (id_i, scale_i, keyed_i, text_i) = (need("id")?, need("scale_id")?, need("keyed")?, need("text")?);

    let mut items: Vec<Item> = Vec::new();
    let mut item_index: HashMap<String, usize> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(items_path, line, e.to_string()))?;
        let get = |idx: usize, what: &str| {
            record
                .get(idx)
                .map(str::trim)
                .ok_or_else(|| Error::parse(items_path, line, format!("missing {what}")))
        };
        let id = get(id_i, "id")?.to_string();
        let scale = get(scale_i, "scale_id")?.to_string();
        let keyed = match get(keyed_i, "keyed")? {
            "+" => Keyed::Plus,
            "-" => Keyed::Minus,
            other => {
                return Err(Error::parse(
                    items_path,
                    line,
                    format!("keyed must be + or -, found {other:?}"),
                ))
            }
        };
        let text = get(text_i, "text")?.to_string();
        if item_index.contains_key(&id) {
            return Err(Error::parse(items_path, line, format!("duplicate item id {id:?}")));
        }
        item_index.insert(id.clone(), items.len());
        items.push(Item {
            id,
            domain: derive_domain(&scale),
            scale,
            keyed,
            text,
        });
    }
    if items.is_empty() {
        return Err(Error::EmptyInput {
            path: items_path.into(),
        });
    }

    let responses_path = responses_path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_path(responses_path)
        .map_err(|e| Error::Schema {
            path: responses_path.into(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema {
            path: responses_path.into(),
            message: e.to_string(),
        })?
        .clone();
    if headers.get(0).map(str::trim) != Some("participant_id") {
        return Err(Error::Schema {
            path: responses_path.into(),
            message: "first column must be participant_id".to_string(),
        });
    }
    // Map response columns onto item order.
    let mut col_to_item: Vec<usize> = Vec::new();
    for h in headers.iter().skip(1) {
        let idx = item_index.get(h.trim()).ok_or_else(|| Error::Schema {
            path: responses_path.into(),
            message: format!("response column {h:?} is not a declared item"),
        })?;
        col_to_item.push(*idx);
    }
    let mut covered = vec![false; items.len()];
    for &i in &col_to_item {
        covered[i] = true;
    }
    if let Some(missing) = covered.iter().position(|&c| !c) {
        return Err(Error::Schema {
            path: responses_path.into(),
            message: format!("no response column for item {:?}", items[missing].id),
        });
    }

    let mut participants = Vec::new();
    let mut responses: Vec<Option<u8>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(responses_path, line, e.to_string()))?;
        let pid = record
            .get(0)
            .ok_or_else(|| Error::parse(responses_path, line, "missing participant_id"))?
            .to_string();
        let mut row: Vec<Option<u8>> = vec![None; items.len()];
        for (c, &item_idx) in col_to_item.iter().enumerate() {
            let raw = record
                .get(c + 1)
                .map(str::trim)
                .unwrap_or("");
            if raw.is_empty() || raw == "NA" {
                continue;
            }
            let v: u8 = raw.parse().map_err(|_| {
                Error::parse(responses_path, line, format!("bad response {raw:?}"))
            })?;
            if v < scale_min || v > scale_max {
                return Err(Error::parse(
                    responses_path,
                    line,
                    format!("response {v} outside {scale_min}..{scale_max}"),
                ));
            }
            row[item_idx] = Some(v);
        }
        participants.push(pid);
        responses.extend(row);
    }
    if participants.is_empty() {
        return Err(Error::EmptyInput {
            path: responses_path.into(),
        });
    }

    let mut scales: IndexMap<String, Vec<usize>> = IndexMap::new();
    for (i, item) in items.iter().enumerate() {
        scales.entry(item.scale.clone()).or_default().push(i);
    }
    let mut domains: IndexMap<String, Vec<usize>> = IndexMap::new();
    for (i, item) in items.iter().enumerate() {
        domains.entry(item.domain.clone()).or_default().push(i);
    }
    for (d, idxs) in domains {
        // A single-level bank (scale == domain) keeps the facet entry.
        scales.entry(d).or_insert(idxs);
    }

    Ok(ItemBank {
        items,
        participants,
        responses,
        scale_min,
        scale_max,
        scales,
    })
}

/// Per-participant factor scores for `scale`: the mean of reverse-coded
/// responses over the scale's items, missing responses excluded pairwise.
/// Participants with no valid response get `None`.
pub fn factor_scores(bank: &ItemBank, scale: &str) -> Result<Vec<Option<f64>>> {
    let item_idxs = bank.scales.get(scale).ok_or_else(|| {
        Error::InvalidInput(format!("unknown scale {scale:?}"))
    })?;
    if item_idxs.is_empty() {
        return Err(Error::InvalidInput(format!("scale {scale:?} has no items")));
    }
    let scores = (0..bank.n_participants())
        .map(|p| {
            let mut sum = 0.0f64;
            let mut count = 0usize;
            for &i in item_idxs {
                if let Some(r) = bank.response(p, i) {
                    sum += bank.recode(bank.items[i].keyed, r);
                    count += 1;
                }
            }
            if count == 0 {
                None
            } else {
                Some(sum / count as f64)
            }
        })
        .collect();
    Ok(scores)
}

/// One item's outcome for the fitting pipeline.
#[derive(Debug, Clone)]
pub struct ItemOutcome {
    pub id: String,
    pub text: String,
    /// Pearson r between the item's original (pre-reverse-code) responses
    /// and the reverse-coded factor score; negatively keyed items load
    /// negatively by construction.
    pub y: f64,
}

/// Item-factor correlations for `scale`, pairwise complete. Items with
/// fewer than 3 paired observations or zero variance are dropped and
/// reported in the warnings list.
pub fn item_outcomes(bank: &ItemBank, scale: &str) -> Result<(Vec<ItemOutcome>, Vec<String>)> {
    let item_idxs = bank
        .scales
        .get(scale)
        .ok_or_else(|| Error::InvalidInput(format!("unknown scale {scale:?}")))?
        .clone();
    let factors = factor_scores(bank, scale)?;
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for i in item_idxs {
        let item = &bank.items[i];
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        for p in 0..bank.n_participants() {
            if let (Some(r), Some(f)) = (bank.response(p, i), factors[p]) {
                xs.push(r as f64);
                fs.push(f);
            }
        }
        if xs.len() < 3 {
            warnings.push(format!(
                "item {} dropped: only {} paired observations",
                item.id,
                xs.len()
            ));
            continue;
        }
        match stats::pearson(&xs, &fs) {
            Some(r) => out.push(ItemOutcome {
                id: item.id.clone(),
                text: item.text.clone(),
                y: r,
            }),
            None => warnings.push(format!("item {} dropped: zero variance", item.id)),
        }
    }
    Ok((out, warnings))
}

/// Generic analysis corpus: `id, text` plus named outcome columns.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub ids: Vec<String>,
    pub texts: Vec<String>,
    pub outcomes: IndexMap<String, Vec<f64>>,
}

/// Reads a delimited corpus with a header. When `outcome_columns` is
/// empty, every column except `id` and `text` becomes an outcome.
pub fn read_corpus(
    path: impl AsRef<Path>,
    outcome_columns: &[String],
    delimiter: u8,
) -> Result<Corpus> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_idx = col("id").ok_or_else(|| Error::Schema {
        path: path.into(),
        message: "missing column \"id\"".to_string(),
    })?;
    let text_idx = col("text").ok_or_else(|| Error::Schema {
        path: path.into(),
        message: "missing column \"text\"".to_string(),
    })?;

    let outcome_names: Vec<String> = if outcome_columns.is_empty() {
        headers
            .iter()
            .filter(|h| *h != "id" && *h != "text")
            .map(str::to_string)
            .collect()
    } else {
        outcome_columns.to_vec()
    };
    let mut outcome_idx = Vec::new();
    for name in &outcome_names {
        outcome_idx.push(col(name).ok_or_else(|| Error::Schema {
            path: path.into(),
            message: format!("missing outcome column {name:?}"),
        })?);
    }

    let mut ids = Vec::new();
    let mut texts = Vec::new();
    let mut outcomes: IndexMap<String, Vec<f64>> = outcome_names
        .iter()
        .map(|n| (n.clone(), Vec::new()))
        .collect();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(path, line, e.to_string()))?;
        ids.push(
            record
                .get(id_idx)
                .ok_or_else(|| Error::parse(path, line, "missing id"))?
                .to_string(),
        );
        texts.push(
            record
                .get(text_idx)
                .ok_or_else(|| Error::parse(path, line, "missing text"))?
                .to_string(),
        );
        for (name, &idx) in outcome_names.iter().zip(&outcome_idx) {
            let raw = record
                .get(idx)
                .ok_or_else(|| Error::parse(path, line, format!("missing {name}")))?;
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("bad outcome {raw:?} in {name}")))?;
            outcomes.get_mut(name).unwrap().push(v);
        }
    }
    Ok(Corpus {
        ids,
        texts,
        outcomes,
    })
}
