//! The direct-map baseline: count tag co-occurrences on the parallel
//! validation pairs, pick the per-source-tag argmax, and score it. Also
//! the label-distribution reports.
//!
//! The map is fit on the same validation pairs it is scored on — that is
//! how the original baseline was constructed — so every report carries an
//! explicit optimistic-baseline caveat.

use std::collections::BTreeMap;

use crate::corpus::types::{ParallelPair, Side, TagId, Tagset};
use crate::error::{Error, Result};

pub const DIRECT_MAP_CAVEAT: &str =
    "direct map fit on the validation pairs it is scored on (optimistic baseline)";

/// Aligned-token counts between the source side's tags (rows) and the
/// target side's tags (columns).
#[derive(Debug, Clone)]
pub struct CooccurrenceMatrix {
    pub counts: Vec<Vec<u64>>,
    pub source: Side,
    pub source_tags: usize,
    pub target_tags: usize,
}

impl CooccurrenceMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Total function from source tags to target tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectMap {
    pub mapping: Vec<TagId>,
    /// Side the map consumes; it produces the other side.
    pub source: Side,
}

impl DirectMap {
    pub fn target(&self) -> Side {
        self.source.other()
    }
}

/// Count aligned tag pairs. `source` selects the row side (z2y uses
/// `Side::Z`). Tag inventory sizes come from the supplied tagsets so that
/// unseen tags still get rows.
pub fn cooccurrence(
    pairs: &[ParallelPair],
    source: Side,
    source_tags: usize,
    target_tags: usize,
) -> Result<CooccurrenceMatrix> {
    if pairs.is_empty() {
        return Err(Error::Data("cooccurrence of empty pair list".into()));
    }
    let mut counts = vec![vec![0u64; target_tags]; source_tags];
    for pair in pairs {
        for (s, t) in pair.tags(source).iter().zip(pair.tags(source.other())) {
            counts[*s][*t] += 1;
        }
    }
    Ok(CooccurrenceMatrix {
        counts,
        source,
        source_tags,
        target_tags,
    })
}

/// Pick the per-source-tag argmax over target counts (independently per
/// row, which is globally optimal for token accuracy) with ties broken
/// toward the lowest target index. Returns the map and its accuracy on
/// the counted tokens.
pub fn best_direct_map(matrix: &CooccurrenceMatrix) -> Result<(DirectMap, f64)> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Data("all-zero cooccurrence matrix".into()));
    }
    let mut mapping = Vec::with_capacity(matrix.counts.len());
    let mut hits = 0u64;
    for row in &matrix.counts {
        let mut best = 0usize;
        for (j, c) in row.iter().enumerate().skip(1) {
            if *c > row[best] {
                best = j;
            }
        }
        hits += row[best];
        mapping.push(best);
    }
    Ok((
        DirectMap {
            mapping,
            source: matrix.source,
        },
        hits as f64 / total as f64,
    ))
}

/// Accuracy of an arbitrary map against a cooccurrence matrix.
pub fn map_accuracy(matrix: &CooccurrenceMatrix, map: &DirectMap) -> Result<f64> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Data("all-zero cooccurrence matrix".into()));
    }
    if map.mapping.len() != matrix.counts.len() {
        return Err(Error::Shape(format!(
            "map covers {} source tags, matrix has {}",
            map.mapping.len(),
            matrix.counts.len()
        )));
    }
    let hits: u64 = matrix
        .counts
        .iter()
        .zip(&map.mapping)
        .map(|(row, target)| row[*target])
        .sum();
    Ok(hits as f64 / total as f64)
}

/// Elementwise image of a tag sequence under the map.
pub fn apply_map(map: &DirectMap, tags: &[TagId]) -> Result<Vec<TagId>> {
    tags.iter()
        .map(|t| {
            map.mapping.get(*t).copied().ok_or_else(|| {
                Error::Data(format!("tag id {t} outside the map's source tagset"))
            })
        })
        .collect()
}

/// Histogram of tags on one side of a pair list: tag → (count, fraction).
pub fn label_distribution(
    pairs: &[ParallelPair],
    side: Side,
    tagset: &Tagset,
) -> Result<Vec<(String, u64, f64)>> {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut total = 0u64;
    for pair in pairs {
        for t in pair.tags(side) {
            *counts.entry(*t).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Data(format!("no tags on side {side}")));
    }
    Ok((0..tagset.len())
        .map(|id| {
            let c = counts.get(&id).copied().unwrap_or(0);
            (tagset.tag(id).to_string(), c, c as f64 / total as f64)
        })
        .collect())
}

// ── serialization ────────────────────────────────────────────────────

/// Map file: one `source_tag<TAB>target_tag` line per source tag.
pub fn write_map(map: &DirectMap, source_tags: &Tagset, target_tags: &Tagset) -> String {
    let mut out = String::new();
    for (s, t) in map.mapping.iter().enumerate() {
        out.push_str(source_tags.tag(s));
        out.push('\t');
        out.push_str(target_tags.tag(*t));
        out.push('\n');
    }
    out
}

pub fn parse_map(
    text: &str,
    path: &str,
    source: Side,
    source_tags: &Tagset,
    target_tags: &Tagset,
) -> Result<DirectMap> {
    let mut mapping = vec![None; source_tags.len()];
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (s, t) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.into(),
            line: i + 1,
            msg: "expected source_tag<TAB>target_tag".into(),
        })?;
        let sid = source_tags.id(s).ok_or_else(|| Error::Parse {
            path: path.into(),
            line: i + 1,
            msg: format!("unknown source tag {s:?}"),
        })?;
        let tid = target_tags.id(t).ok_or_else(|| Error::Parse {
            path: path.into(),
            line: i + 1,
            msg: format!("unknown target tag {t:?}"),
        })?;
        mapping[sid] = Some(tid);
    }
    let mapping = mapping
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| {
                Error::Data(format!(
                    "map file {path} does not cover source tag {:?}",
                    source_tags.tag(i)
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectMap { mapping, source })
}

/// CSV rows `tag,count,fraction` with RFC-4180 quoting where needed
/// (real tagsets contain commas).
pub fn histogram_csv(histogram: &[(String, u64, f64)]) -> String {
    let quote = |s: &str| {
        if s.contains(',') || s.contains('"') || s.contains('\n') {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    let mut out = String::from("tag,count,fraction\n");
    for (tag, count, fraction) in histogram {
        out.push_str(&format!("{},{count},{fraction}\n", quote(tag)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::ParallelPair;

    fn pair(y: &[usize], z: &[usize]) -> ParallelPair {
        let tokens = (0..y.len()).map(|i| format!("t{i}")).collect();
        ParallelPair::new(tokens, y.to_vec(), z.to_vec()).unwrap()
    }

    fn matrix_from(counts: Vec<Vec<u64>>) -> CooccurrenceMatrix {
        let target_tags = counts[0].len();
        CooccurrenceMatrix {
            source_tags: counts.len(),
            target_tags,
            counts,
            source: Side::Z,
        }
    }

    #[test]
    fn cooccurrence_identity_diagonal() {
        let pairs = [pair(&[0, 1], &[0, 1])];
        let m = cooccurrence(&pairs, Side::Z, 2, 2).unwrap();
        assert_eq!(m.counts, vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn duplicate_pairs_double_counts() {
        let pairs = [pair(&[0], &[1]), pair(&[0], &[1])];
        let m = cooccurrence(&pairs, Side::Z, 2, 2).unwrap();
        assert_eq!(m.counts[1][0], 2);
    }

    #[test]
    fn cooccurrence_rejects_empty() {
        assert!(cooccurrence(&[], Side::Z, 2, 2).is_err());
    }

    #[test]
    fn identity_matrix_gives_identity_map() {
        let m = matrix_from(vec![vec![3, 0], vec![0, 2]]);
        let (map, acc) = best_direct_map(&m).unwrap();
        assert_eq!(map.mapping, vec![0, 1]);
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn worked_example_with_tie() {
        // Rows [[5,1],[2,2],[0,3]]: row 1 ties and takes the lower index.
        let m = matrix_from(vec![vec![5, 1], vec![2, 2], vec![0, 3]]);
        let (map, acc) = best_direct_map(&m).unwrap();
        assert_eq!(map.mapping, vec![0, 0, 1]);
        assert!((acc - 10.0 / 13.0).abs() < 1e-12);

        // Exhaustive check over all 2^3 maps confirms the maximum.
        let mut best = 0.0f64;
        for bits in 0..8usize {
            let candidate = DirectMap {
                mapping: vec![bits & 1, (bits >> 1) & 1, (bits >> 2) & 1],
                source: Side::Z,
            };
            best = best.max(map_accuracy(&m, &candidate).unwrap());
        }
        assert!((best - acc).abs() < 1e-12);
    }

    #[test]
    fn surjection_loss_when_source_larger() {
        // Two source rows argmax onto the same target column.
        let m = matrix_from(vec![vec![4, 0], vec![3, 1], vec![0, 5]]);
        let (map, _) = best_direct_map(&m).unwrap();
        assert_eq!(map.mapping[0], map.mapping[1]);
    }

    #[test]
    fn all_zero_matrix_is_an_error() {
        let m = matrix_from(vec![vec![0, 0]]);
        assert!(best_direct_map(&m).is_err());
    }

    #[test]
    fn apply_map_examples() {
        let map = DirectMap {
            mapping: vec![1, 0, 1],
            source: Side::Z,
        };
        assert_eq!(apply_map(&map, &[]).unwrap(), Vec::<usize>::new());
        assert_eq!(apply_map(&map, &[0, 2, 1]).unwrap(), vec![1, 1, 0]);
        assert!(apply_map(&map, &[3]).is_err());
        let identity = DirectMap {
            mapping: vec![0, 1, 2],
            source: Side::Z,
        };
        assert_eq!(apply_map(&identity, &[2, 0, 1]).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn label_distribution_fractions() {
        let tagset = Tagset::new("y", vec!["A".into(), "B".into()]).unwrap();
        let pairs = [pair(&[0, 0, 0, 1], &[0, 0, 0, 0])];
        let hist = label_distribution(&pairs, Side::Y, &tagset).unwrap();
        assert_eq!(hist[0], ("A".into(), 3, 0.75));
        assert_eq!(hist[1], ("B".into(), 1, 0.25));
        let total: f64 = hist.iter().map(|(_, _, f)| f).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_tag_distribution_is_one() {
        let tagset = Tagset::new("y", vec!["A".into()]).unwrap();
        let pairs = [pair(&[0, 0], &[0, 0])];
        let hist = label_distribution(&pairs, Side::Y, &tagset).unwrap();
        assert_eq!(hist[0].2, 1.0);
    }

    #[test]
    fn map_file_round_trip() {
        let source = Tagset::new("z", vec!["V".into(), "N,comma".into()]).unwrap();
        let target = Tagset::new("y", vec!["VERB".into(), "NOUN".into()]).unwrap();
        let map = DirectMap {
            mapping: vec![0, 1],
            source: Side::Z,
        };
        let text = write_map(&map, &source, &target);
        let back = parse_map(&text, "map.tsv", Side::Z, &source, &target).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn histogram_csv_quotes_commas() {
        let rows = vec![(",".to_string(), 3u64, 1.0f64)];
        let csv = histogram_csv(&rows);
        assert!(csv.contains("\",\",3,1"));
    }
}
