//! Biometric performance: FMR/FNMR sweeps, EER, DET points, FTA, cross-comparison of
//! template sets, score fusion, and report files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{FusionRule, MatcherConfig};
use crate::error::{Error, Result};
use crate::geometry::{FingerId, HandSide};
use crate::matcher::{compare_templates, fuse_scores};
use crate::minutiae::MinutiaTemplate;
use crate::par::Exec;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePoint {
    pub threshold: f64,
    pub fmr: f64,
    pub fnmr: f64,
}

impl ScoreSet {
    fn validate(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::EmptyScoreSet);
        }
        if self.genuine.iter().chain(&self.impostor).any(|v| !v.is_finite()) {
            return Err(Error::Parse("scores must be finite".into()));
        }
        Ok(())
    }
}

/// FMR and FNMR at every distinct score plus ±∞, thresholds ascending; a comparison is
/// accepted when its score is at least the threshold.
pub fn score_rates(s: &ScoreSet) -> Result<Vec<RatePoint>> {
    s.validate()?;
    let mut g = s.genuine.clone();
    let mut im = s.impostor.clone();
    g.sort_by(f64::total_cmp);
    im.sort_by(f64::total_cmp);
    let mut ts: Vec<f64> = g.iter().chain(&im).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut thresholds = Vec::with_capacity(ts.len() + 2);
    thresholds.push(f64::NEG_INFINITY);
    thresholds.extend(ts);
    thresholds.push(f64::INFINITY);
    let (ng, ni) = (g.len() as f64, im.len() as f64);
    Ok(thresholds
        .into_iter()
        .map(|t| {
            let rejected_g = g.partition_point(|&v| v < t);
            let rejected_i = im.partition_point(|&v| v < t);
            RatePoint {
                threshold: t,
                fmr: (im.len() - rejected_i) as f64 / ni,
                fnmr: rejected_g as f64 / ng,
            }
        })
        .collect())
}

/// EER from a rate table: the first point where FNMR reaches FMR, linearly interpolated
/// with its predecessor.
pub fn eer_from_rates(rates: &[RatePoint]) -> f64 {
    let k = rates
        .iter()
        .position(|r| r.fnmr >= r.fmr)
        .expect("fnmr reaches 1 at +inf");
    if k == 0 {
        return rates[0].fmr;
    }
    let (p, q) = (rates[k - 1], rates[k]);
    let (dp, dq) = (p.fnmr - p.fmr, q.fnmr - q.fmr);
    let lambda = -dp / (dq - dp);
    p.fmr + lambda * (q.fmr - p.fmr)
}

pub fn equal_error_rate(s: &ScoreSet) -> Result<f64> {
    Ok(eer_from_rates(&score_rates(s)?))
}

/// `min_t max(FMR, FNMR)` over the rate table.
pub fn discrete_eer(rates: &[RatePoint]) -> f64 {
    rates.iter().map(|r| r.fmr.max(r.fnmr)).fold(1.0, f64::min)
}

pub fn fta_rate(attempts: usize, failures: usize) -> Result<f64> {
    if attempts == 0 {
        return Err(Error::NoAttempts);
    }
    if failures > attempts {
        return Err(Error::Config(format!("{failures} failures exceed {attempts} attempts")));
    }
    Ok(failures as f64 / attempts as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Genuine,
    Impostor,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        })
    }
}

/// One row of a score file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub probe_id: String,
    pub reference_id: String,
    pub finger_id: u8,
    pub label: Label,
    pub score: f64,
}

pub fn score_set(records: &[ScoreRecord]) -> ScoreSet {
    let mut s = ScoreSet::default();
    for r in records {
        match r.label {
            Label::Genuine => s.genuine.push(r.score),
            Label::Impostor => s.impostor.push(r.score),
        }
    }
    s
}

pub fn write_scores(records: &[ScoreRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let rec: ScoreRecord = row.map_err(|e| csv_error(path, e))?;
        FingerId::new(rec.finger_id).map_err(|_| Error::Parse(format!("invalid finger id {} in {}", rec.finger_id, path.display())))?;
        if !rec.score.is_finite() {
            return Err(Error::Parse(format!("non-finite score in {}", path.display())));
        }
        out.push(rec);
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse(format!("{}: {other:?}", path.display())),
        }
    } else {
        Error::Parse(format!("{}: {e}", path.display()))
    }
}

/// A template with its subject and session, as named `<subject>_<finger>_<session>`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateEntry {
    pub subject: String,
    pub session: String,
    pub template: MinutiaTemplate,
}

impl TemplateEntry {
    pub fn sample_id(&self) -> String {
        format!("{}_{}", self.subject, self.session)
    }
}

/// Splits a `<subject>_<finger>_<session>` stem. Subject names may contain underscores.
pub fn parse_sample_name(stem: &str) -> Result<(String, FingerId, String)> {
    let bad = || Error::Parse(format!("sample name {stem:?} is not <subject>_<finger>_<session>"));
    let (rest, session) = stem.rsplit_once('_').ok_or_else(bad)?;
    let (subject, finger) = rest.rsplit_once('_').ok_or_else(bad)?;
    let code: u8 = finger.parse().map_err(|_| bad())?;
    let finger = FingerId::new(code).map_err(|_| bad())?;
    if subject.is_empty() || session.is_empty() {
        return Err(bad());
    }
    Ok((subject.to_string(), finger, session.to_string()))
}

/// Comparisons between samples of the same finger taken in different sessions: genuine
/// for the same subject, impostor otherwise. Rows follow the entry order.
pub fn cross_compare(entries: &[TemplateEntry], cfg: &MatcherConfig, exec: Exec) -> Result<Vec<ScoreRecord>> {
    let mut pairs = Vec::new();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            let (a, b) = (&entries[i], &entries[j]);
            if a.template.finger_id == b.template.finger_id && a.session != b.session {
                pairs.push((i, j));
            }
        }
    }
    let scores = exec.map(&pairs, |&(i, j)| compare_templates(&entries[i].template, &entries[j].template, cfg));
    pairs
        .iter()
        .zip(scores)
        .map(|(&(i, j), s)| {
            let (a, b) = (&entries[i], &entries[j]);
            Ok(ScoreRecord {
                probe_id: a.sample_id(),
                reference_id: b.sample_id(),
                finger_id: a.template.finger_id.code(),
                label: if a.subject == b.subject { Label::Genuine } else { Label::Impostor },
                score: s?.value,
            })
        })
        .collect()
}

/// How many fingers each fused comparison combines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionSize {
    Four,
    Eight,
}

impl FromStr for FusionSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4" => Ok(FusionSize::Four),
            "8" => Ok(FusionSize::Eight),
            _ => Err(Error::Config(format!("fusion size must be 4 or 8, got {s:?}"))),
        }
    }
}

impl FusionSize {
    pub fn count(self) -> usize {
        match self {
            FusionSize::Four => 4,
            FusionSize::Eight => 8,
        }
    }
}

/// Fuses per-finger rows sharing a probe and reference into one row per hand (4) or per
/// sample pair (8). Groups lacking some of the fingers are left out. Fused rows carry
/// finger id 0.
pub fn fuse_records(records: &[ScoreRecord], size: FusionSize, rule: FusionRule) -> Result<Vec<ScoreRecord>> {
    type Key = (String, String, Option<HandSide>);
    let mut groups: BTreeMap<Key, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        let hand = match size {
            FusionSize::Four => Some(FingerId::new(r.finger_id)?.hand()),
            FusionSize::Eight => None,
        };
        groups.entry((r.probe_id.clone(), r.reference_id.clone(), hand)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((probe, reference, _), rows) in groups {
        let mut fingers: Vec<u8> = rows.iter().map(|r| r.finger_id).collect();
        fingers.sort_unstable();
        fingers.dedup();
        if fingers.len() != size.count() || rows.len() != size.count() {
            continue;
        }
        let label = rows[0].label;
        if rows.iter().any(|r| r.label != label) {
            return Err(Error::Parse(format!("mixed labels for {probe} vs {reference}")));
        }
        let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
        out.push(ScoreRecord {
            probe_id: probe,
            reference_id: reference,
            finger_id: 0,
            label,
            score: fuse_scores(&scores, rule)?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub genuine: usize,
    pub impostor: usize,
    pub attempts: Option<usize>,
    pub failures: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub eer: f64,
    pub eer_discrete: f64,
    /// (fmr, fnmr) in ascending threshold order.
    pub det: Vec<(f64, f64)>,
    pub fta: Option<f64>,
    pub counts: Counts,
    pub config: serde_json::Value,
}

impl EvaluationReport {
    pub fn from_scores(s: &ScoreSet, config: serde_json::Value) -> Result<Self> {
        let rates = score_rates(s)?;
        Ok(Self {
            eer: eer_from_rates(&rates),
            eer_discrete: discrete_eer(&rates),
            det: rates.iter().map(|r| (r.fmr, r.fnmr)).collect(),
            fta: None,
            counts: Counts {
                genuine: s.genuine.len(),
                impostor: s.impostor.len(),
                attempts: None,
                failures: None,
            },
            config,
        })
    }

    pub fn with_fta(mut self, attempts: usize, failures: usize) -> Result<Self> {
        self.fta = Some(fta_rate(attempts, failures)?);
        self.counts.attempts = Some(attempts);
        self.counts.failures = Some(failures);
        Ok(self)
    }
}

/// Path of the DET CSV written next to a report.
pub fn det_csv_path(report_path: &Path) -> PathBuf {
    let stem = report_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    report_path.with_file_name(format!("{stem}_det.csv"))
}

pub fn det_csv(det: &[(f64, f64)]) -> String {
    let mut out = String::from("fmr,fnmr\n");
    for (a, b) in det {
        out.push_str(&format!("{a},{b}\n"));
    }
    out
}

/// Writes the report as JSON and its DET points as `<stem>_det.csv` alongside.
pub fn write_report(r: &EvaluationReport, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(r).map_err(|e| Error::Codec(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
    let det_path = det_csv_path(path);
    std::fs::write(&det_path, det_csv(&r.det)).map_err(|e| Error::io(&det_path, e))?;
    Ok(det_path)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvaluationReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minutiae::Minutia;

    fn set(g: &[f64], i: &[f64]) -> ScoreSet {
        ScoreSet {
            genuine: g.to_vec(),
            impostor: i.to_vec(),
        }
    }

    fn at(rates: &[RatePoint], t: f64) -> RatePoint {
        // rates are step functions; take the smallest listed threshold >= t
        *rates.iter().find(|r| r.threshold >= t).unwrap()
    }

    #[test]
    fn rate_examples() {
        let r = score_rates(&set(&[1.0], &[0.0])).unwrap();
        let p = at(&r, 0.5);
        assert_eq!((p.fmr, p.fnmr), (0.0, 0.0));
        let r = score_rates(&set(&[0.5], &[0.5])).unwrap();
        for p in &r {
            assert_eq!(p.fmr + p.fnmr, 1.0);
        }
        assert!(matches!(score_rates(&set(&[], &[1.0])), Err(Error::EmptyScoreSet)));
        assert!(matches!(score_rates(&set(&[0.1], &[])), Err(Error::EmptyScoreSet)));
    }

    #[test]
    fn rate_table_matches_counting() {
        let s = set(&[0.7, 0.2], &[0.4, 0.2]);
        let r = score_rates(&s).unwrap();
        let ts: Vec<f64> = r.iter().map(|p| p.threshold).collect();
        assert_eq!(ts, vec![f64::NEG_INFINITY, 0.2, 0.4, 0.7, f64::INFINITY]);
        let expect = [(1.0, 0.0), (1.0, 0.0), (0.5, 0.5), (0.0, 0.5), (0.0, 1.0)];
        for (p, e) in r.iter().zip(expect) {
            assert_eq!((p.fmr, p.fnmr), e);
        }
    }

    #[test]
    fn eer_examples() {
        assert_eq!(equal_error_rate(&set(&[0.9, 0.8], &[0.1, 0.2])).unwrap(), 0.0);
        let l = [0.3, 0.1, 0.8, 0.55];
        assert!((equal_error_rate(&set(&l, &l)).unwrap() - 0.5).abs() < 1e-12);
        assert!((equal_error_rate(&set(&[0.6, 0.4], &[0.5, 0.3])).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(equal_error_rate(&set(&[0.0], &[1.0])).unwrap(), 1.0);
    }

    #[test]
    fn fta_examples() {
        assert!((fta_rate(232, 2).unwrap() - 0.00862).abs() < 1e-5);
        assert_eq!(fta_rate(10, 0).unwrap(), 0.0);
        assert_eq!(fta_rate(7, 7).unwrap(), 1.0);
        assert!(matches!(fta_rate(0, 0), Err(Error::NoAttempts)));
        assert!(fta_rate(2, 3).is_err());
    }

    #[test]
    fn sample_names() {
        let (s, f, sess) = parse_sample_name("subj_07_3_2").unwrap();
        assert_eq!((s.as_str(), f.code(), sess.as_str()), ("subj_07", 3, "2"));
        assert!(parse_sample_name("a_6_1").is_err());
        assert!(parse_sample_name("nounderscore").is_err());
    }

    fn entry(subject: &str, session: &str, finger: u8, shift: u16) -> TemplateEntry {
        let ms = (0..12u16).map(|i| Minutia::new(20 + i * 13 % 200 + shift, 30 + i * 29 % 300, i as f64)).collect();
        TemplateEntry {
            subject: subject.into(),
            session: session.into(),
            template: MinutiaTemplate::new(FingerId::new(finger).unwrap(), 300, 400, ms).unwrap(),
        }
    }

    #[test]
    fn cross_comparison_labels_and_modes() {
        let entries = vec![
            entry("a", "1", 2, 0),
            entry("a", "2", 2, 0),
            entry("b", "1", 2, 40),
            entry("b", "2", 2, 40),
            entry("a", "1", 3, 0),
            entry("b", "2", 3, 0),
        ];
        let cfg = MatcherConfig::default();
        let seq = cross_compare(&entries, &cfg, Exec::Sequential).unwrap();
        let par = cross_compare(&entries, &cfg, Exec::Parallel).unwrap();
        assert_eq!(seq, par);
        let labels: Vec<(String, String, Label)> = seq.iter().map(|r| (r.probe_id.clone(), r.reference_id.clone(), r.label)).collect();
        assert_eq!(
            labels,
            vec![
                ("a_1".into(), "a_2".into(), Label::Genuine),
                ("a_1".into(), "b_2".into(), Label::Impostor),
                ("a_2".into(), "b_1".into(), Label::Impostor),
                ("b_1".into(), "b_2".into(), Label::Genuine),
                ("a_1".into(), "b_2".into(), Label::Impostor),
            ]
        );
        assert_eq!(seq[0].score, 1.0);
    }

    fn rec(p: &str, r: &str, f: u8, label: Label, score: f64) -> ScoreRecord {
        ScoreRecord {
            probe_id: p.into(),
            reference_id: r.into(),
            finger_id: f,
            label,
            score,
        }
    }

    #[test]
    fn fusion_groups() {
        let mut rows = Vec::new();
        for f in [2, 3, 4, 5] {
            rows.push(rec("a_1", "a_2", f, Label::Genuine, f as f64 / 10.0));
        }
        for f in [7, 8, 9, 10] {
            rows.push(rec("a_1", "a_2", f, Label::Genuine, 0.1));
        }
        rows.push(rec("a_1", "b_2", 2, Label::Impostor, 0.3));
        let four = fuse_records(&rows, FusionSize::Four, FusionRule::Mean).unwrap();
        assert_eq!(four.len(), 2);
        assert!((four[0].score - 0.35).abs() < 1e-12 || (four[1].score - 0.35).abs() < 1e-12);
        let eight = fuse_records(&rows, FusionSize::Eight, FusionRule::Max).unwrap();
        assert_eq!(eight.len(), 1);
        assert_eq!(eight[0].score, 0.5);
        assert!("6".parse::<FusionSize>().is_err());
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = set(&[0.9, 0.7], &[0.1]);
        let report = EvaluationReport::from_scores(&s, serde_json::json!({"k": 1})).unwrap().with_fta(10, 1).unwrap();
        let path = dir.path().join("r.json");
        let det = write_report(&report, &path).unwrap();
        assert_eq!(det, dir.path().join("r_det.csv"));
        assert_eq!(read_report(&path).unwrap(), report);
        let csv = std::fs::read_to_string(det).unwrap();
        assert_eq!(csv.lines().count(), report.det.len() + 1);
        assert_eq!(csv.lines().next().unwrap(), "fmr,fnmr");
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for k in ["eer", "det", "fta", "counts", "config"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert!(matches!(write_report(&report, dir.path().join("missing/r.json")), Err(Error::Io { .. })));
    }

    #[test]
    fn det_of_three_points() {
        let csv = det_csv(&[(1.0, 0.0), (0.5, 0.5), (0.0, 1.0)]);
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn score_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![rec("a_1", "a_2", 2, Label::Genuine, 0.75), rec("a_1", "b_2", 2, Label::Impostor, 0.125)];
        let p = dir.path().join("s.csv");
        write_scores(&rows, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("probe_id,reference_id,finger_id,label,score\n"));
        assert_eq!(read_scores(&p).unwrap(), rows);
        std::fs::write(&p, "probe_id,reference_id,finger_id,label,score\na,b,2,maybe,0.1\n").unwrap();
        assert!(matches!(read_scores(&p), Err(Error::Parse(_))));
        assert!(matches!(read_scores(dir.path().join("nope.csv")), Err(Error::Io { .. })));
    }
}
