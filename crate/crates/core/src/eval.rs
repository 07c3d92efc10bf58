//! Dataset evaluation: correlate predicted scores with subjective scores.
//!
//! A manifest names one train pair (original + distorted) and a set of test
//! videos with MOS labels. The harness trains on the pair, scores every test
//! video, and reports Pearson (LCC) and Spearman (SROCC) correlations,
//! signed, with absolute values alongside in the summary line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::net::NetworkConfig;
use crate::score::score_video;
use crate::train::{train_pair, TrainConfig};
use crate::video::{infer_format, read_sequence, ChannelMode, FrameSequence};

/// Reference correlations reported for this method on the ECVQ dataset.
/// Reproducing them needs the full dataset and full-resolution training, so
/// they are advisory targets for full-scale runs, not assertions; a run on
/// ECVQ should land within the tolerance on both coefficients.
pub const ECVQ_REFERENCE_LCC: f64 = 0.5089;
pub const ECVQ_REFERENCE_SROCC: f64 = 0.5209;
pub const ECVQ_REFERENCE_TOLERANCE: f64 = 0.05;

fn check_corr_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "correlation inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Dimension(format!(
            "correlation needs at least 2 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Contract("correlation inputs must be finite".into()));
    }
    Ok(())
}

/// Sample Pearson correlation coefficient, in [-1, 1].
pub fn pearson_lcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_corr_inputs(x, y)?;
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    for (var, name) in [(var_x, "first"), (var_y, "second")] {
        if var == 0.0 {
            return Err(Error::DegenerateVariance(format!(
                "{name} correlation argument is constant"
            )));
        }
    }
    Ok((cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Average fractional ranks, ties sharing the mean of their positions
/// (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean rank
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = mean_rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank-order correlation: Pearson over average fractional ranks.
pub fn spearman_srocc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_corr_inputs(x, y)?;
    pearson_lcc(&average_ranks(x), &average_ranks(y)).map_err(|e| match e {
        Error::DegenerateVariance(msg) => {
            Error::DegenerateVariance(format!("{msg} (all ranks tie)"))
        }
        other => other,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifestRole {
    Train,
    Test,
}

impl fmt::Display for ManifestRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManifestRole::Train => "train",
            ManifestRole::Test => "test",
        })
    }
}

impl FromStr for ManifestRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(ManifestRole::Train),
            "test" => Ok(ManifestRole::Test),
            other => Err(Error::Manifest(format!("unknown role `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub video_id: String,
    pub path: PathBuf,
    /// Subjective score; absent on the train row.
    pub mos: Option<f64>,
    pub role: ManifestRole,
    /// Distorted counterpart of the train row's original.
    pub pair_path: Option<PathBuf>,
}

/// A parsed manifest: exactly one train pair plus the labeled test entries,
/// in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub train: ManifestEntry,
    pub tests: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses the CSV `video_id,path,mos,role[,pair_path]`. Relative paths
    /// are resolved against `base_dir` when given.
    pub fn parse_csv(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Manifest(e.to_string()))?.clone();
        let expected = ["video_id", "path", "mos", "role"];
        let header_fields: Vec<&str> = headers.iter().collect();
        let valid = header_fields.len() >= expected.len()
            && header_fields[..4] == expected
            && (header_fields.len() == 4
                || (header_fields.len() == 5 && header_fields[4] == "pair_path"));
        if !valid {
            return Err(Error::Manifest(format!(
                "header must be video_id,path,mos,role[,pair_path], got {}",
                header_fields.join(",")
            )));
        }
        let resolve = |raw: &str| -> PathBuf {
            let p = PathBuf::from(raw);
            match (p.is_relative(), base_dir) {
                (true, Some(base)) => base.join(p),
                _ => p,
            }
        };

        let mut train: Option<ManifestEntry> = None;
        let mut tests = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Manifest(e.to_string()))?;
            let line = i + 2; // 1-based, after the header
            let field = |idx: usize| record.get(idx).unwrap_or("");
            let video_id = field(0).to_string();
            if video_id.is_empty() {
                return Err(Error::Manifest(format!("line {line}: empty video_id")));
            }
            let mos = match field(2) {
                "" => None,
                raw => Some(raw.parse::<f64>().map_err(|_| {
                    Error::Manifest(format!("line {line}: bad mos `{raw}`"))
                })?),
            };
            let role: ManifestRole = field(3).parse()?;
            let pair_path = match field(4) {
                "" => None,
                raw => Some(resolve(raw)),
            };
            let entry = ManifestEntry {
                video_id,
                path: resolve(field(1)),
                mos,
                role,
                pair_path,
            };
            match role {
                ManifestRole::Train => {
                    if entry.pair_path.is_none() {
                        return Err(Error::Manifest(format!(
                            "line {line}: train row needs pair_path (the distorted copy)"
                        )));
                    }
                    if train.replace(entry).is_some() {
                        return Err(Error::Manifest(
                            "manifest must have exactly one train row, found several".into(),
                        ));
                    }
                }
                ManifestRole::Test => {
                    match entry.mos {
                        Some(m) if m.is_finite() => {}
                        _ => {
                            return Err(Error::Manifest(format!(
                                "line {line}: test row needs a finite mos"
                            )))
                        }
                    }
                    tests.push(entry);
                }
            }
        }
        let train = train.ok_or_else(|| {
            Error::Manifest("manifest must have exactly one train row, found none".into())
        })?;
        Ok(Manifest { train, tests })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path.parent())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerVideo {
    pub video_id: String,
    pub predicted: f64,
    pub mos: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport {
    pub lcc: f64,
    pub srocc: f64,
    pub n: usize,
    pub per_video: Vec<PerVideo>,
}

impl CorrelationReport {
    /// `n,lcc,srocc,abs_lcc,abs_srocc` at full precision. Signed values
    /// first; the unsigned pair is appended because the score's polarity
    /// against MOS is dataset-dependent.
    pub fn summary_line(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?}",
            self.n,
            self.lcc,
            self.srocc,
            self.lcc.abs(),
            self.srocc.abs()
        )
    }

    /// Per-video CSV table `video_id,predicted,mos` in manifest order.
    pub fn to_csv_table(&self) -> String {
        let mut out = String::from("video_id,predicted,mos\n");
        for row in &self.per_video {
            out.push_str(&format!("{},{:?},{:?}\n", row.video_id, row.predicted, row.mos));
        }
        out
    }
}

/// Scores every test entry with `scorer` and correlates against MOS. Fails
/// without a report if any single entry fails.
pub fn evaluate_with_scorer(
    manifest: &Manifest,
    mut scorer: impl FnMut(&ManifestEntry) -> Result<f64>,
) -> Result<CorrelationReport> {
    if manifest.tests.len() < 2 {
        return Err(Error::Manifest(format!(
            "need at least 2 test entries to correlate, got {}",
            manifest.tests.len()
        )));
    }
    let mut per_video = Vec::with_capacity(manifest.tests.len());
    for entry in &manifest.tests {
        let predicted = scorer(entry)?;
        per_video.push(PerVideo {
            video_id: entry.video_id.clone(),
            predicted,
            mos: entry.mos.expect("manifest parse enforces test MOS"),
        });
    }
    let predicted: Vec<f64> = per_video.iter().map(|r| r.predicted).collect();
    let mos: Vec<f64> = per_video.iter().map(|r| r.mos).collect();
    Ok(CorrelationReport {
        lcc: pearson_lcc(&predicted, &mos)?,
        srocc: spearman_srocc(&predicted, &mos)?,
        n: per_video.len(),
        per_video,
    })
}

fn read_video(path: &Path, mode: ChannelMode) -> Result<FrameSequence> {
    read_sequence(path, infer_format(path)?, mode)
}

/// The full protocol: train once on the manifest's pair, score every test
/// video, correlate with MOS.
pub fn evaluate_manifest(
    manifest: &Manifest,
    net_cfg: &NetworkConfig,
    train_cfg: &TrainConfig,
) -> Result<CorrelationReport> {
    let mode = ChannelMode::for_channel_count(net_cfg.in_channels)?;
    let original = read_video(&manifest.train.path, mode)?;
    let distorted_path = manifest.train.pair_path.as_ref().expect("parse enforces pair_path");
    let distorted = read_video(distorted_path, mode)?;
    let (weights, _trace) = train_pair(&original, &distorted, net_cfg, train_cfg)?;
    evaluate_with_scorer(manifest, |entry| {
        let video = read_video(&entry.path, mode)?;
        Ok(score_video(&weights, &video)?.score)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distort::{apply_distortion, DistortionKind, DistortionSpec};
    use crate::tensor::{Shape4, Tensor4};
    use crate::video::{write_sequence, VideoFormat};

    #[test]
    fn pearson_hand_oracle() {
        let r = pearson_lcc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12, "{r}");
    }

    #[test]
    fn pearson_affine_endpoints() {
        let x = [0.5, 1.0, 2.5, 4.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_lcc(&x, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_lcc(&x, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_constant_input() {
        let err = pearson_lcc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)), "{err:?}");
        let err = pearson_lcc(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)), "{err:?}");
    }

    #[test]
    fn pearson_affine_invariance_argumentwise() {
        let x = [3.0, 1.0, 4.0, 1.5, 9.0];
        let y = [2.0, 7.0, 1.0, 8.0, 2.0];
        let base = pearson_lcc(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| 3.5 * v - 2.0).collect();
        let y2: Vec<f64> = y.iter().map(|v| 0.25 * v + 10.0).collect();
        assert!((pearson_lcc(&x2, &y).unwrap() - base).abs() < 1e-12);
        assert!((pearson_lcc(&x, &y2).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn spearman_hand_oracle() {
        // ranks are the values themselves; sum of squared rank diffs is 6:
        // 1 - 6*6/(3*8) = -0.5
        let r = spearman_srocc(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
        assert!((r + 0.5).abs() < 1e-12, "{r}");
    }

    #[test]
    fn spearman_is_one_for_any_increasing_map() {
        let x: [f64; 5] = [0.1, 0.7, 1.3, 2.9, 5.0];
        let y: Vec<f64> = x.iter().map(|&v| v.exp() + v).collect();
        assert_eq!(spearman_srocc(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn spearman_invariant_under_monotone_transform() {
        let x = [3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        let y = [2.0, 7.0, 1.0, 8.0, 2.5, 3.0];
        let base = spearman_srocc(&x, &y).unwrap();
        let y3: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
        assert_eq!(spearman_srocc(&x, &y3).unwrap(), base);
    }

    #[test]
    fn average_ranks_handle_ties() {
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[5.0, 3.0, 3.0, 1.0]), vec![4.0, 2.5, 2.5, 1.0]);
        assert_eq!(average_ranks(&[2.0, 2.0, 2.0]), vec![2.0, 2.0, 2.0]);
    }

    /// Rank each value as 1 + (#smaller) + (#equal-before-it)/2, the textbook
    /// average-rank definition, independent of the sort-based implementation.
    fn brute_force_ranks(values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|&v| {
                let smaller = values.iter().filter(|&&w| w < v).count() as f64;
                let equal = values.iter().filter(|&&w| w == v).count() as f64;
                smaller + (equal + 1.0) / 2.0
            })
            .collect()
    }

    fn brute_force_spearman(x: &[f64], y: &[f64]) -> Result<f64> {
        pearson_lcc(&brute_force_ranks(x), &brute_force_ranks(y))
    }

    #[test]
    fn spearman_matches_brute_force_with_ties() {
        let x = [1.0, 1.0, 2.0];
        let y = [1.0, 2.0, 3.0];
        assert_eq!(
            spearman_srocc(&x, &y).unwrap(),
            brute_force_spearman(&x, &y).unwrap()
        );
    }

    #[test]
    fn spearman_matches_brute_force_on_small_tie_vectors() {
        // every vector of length 4 over {1,2,3}, paired against a fixed probe
        let probe = [2.0, 1.0, 3.0, 2.0];
        for code in 0..81u32 {
            let v: Vec<f64> = (0..4).map(|i| ((code / 3u32.pow(i)) % 3 + 1) as f64).collect();
            if v.iter().all(|&a| a == v[0]) {
                continue; // degenerate by construction
            }
            assert_eq!(
                spearman_srocc(&v, &probe).unwrap(),
                brute_force_spearman(&v, &probe).unwrap(),
                "vector {v:?}"
            );
        }
    }

    #[test]
    fn all_ties_is_degenerate() {
        let err = spearman_srocc(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance(_)), "{err:?}");
    }

    #[test]
    fn negating_an_argument_negates_both_coefficients() {
        let x = [3.0, 1.0, 4.0, 1.5, 9.0];
        let y = [2.0, 7.0, 1.0, 8.0, 2.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson_lcc(&neg, &y).unwrap(), -pearson_lcc(&x, &y).unwrap());
        assert_eq!(spearman_srocc(&neg, &y).unwrap(), -spearman_srocc(&x, &y).unwrap());
    }

    #[test]
    fn mismatched_or_short_inputs_rejected() {
        assert!(pearson_lcc(&[1.0], &[1.0]).is_err());
        assert!(pearson_lcc(&[1.0, 2.0], &[1.0]).is_err());
        assert!(spearman_srocc(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    const GOOD_MANIFEST: &str = "\
video_id,path,mos,role,pair_path
src,orig_dir,,train,dist_dir
clip_a,a_dir,4.5,test,
clip_b,b_dir,2.0,test,
clip_c,c_dir,3.25,test,
";

    #[test]
    fn manifest_parses_roles_paths_and_mos() {
        let m = Manifest::parse_csv(GOOD_MANIFEST, Some(Path::new("/data"))).unwrap();
        assert_eq!(m.train.video_id, "src");
        assert_eq!(m.train.path, Path::new("/data/orig_dir"));
        assert_eq!(m.train.pair_path.as_deref(), Some(Path::new("/data/dist_dir")));
        assert_eq!(m.tests.len(), 3);
        assert_eq!(m.tests[1].mos, Some(2.0));
        assert_eq!(m.tests[2].path, Path::new("/data/c_dir"));
    }

    #[test]
    fn manifest_structural_errors() {
        let no_train = "video_id,path,mos,role\na,p,1.0,test\nb,q,2.0,test\n";
        assert!(Manifest::parse_csv(no_train, None).is_err());

        let two_trains = "video_id,path,mos,role,pair_path\n\
                          a,p,,train,x\nb,q,,train,y\nc,r,1.0,test,\n";
        assert!(Manifest::parse_csv(two_trains, None).is_err());

        let train_without_pair = "video_id,path,mos,role\na,p,,train\nb,q,2.0,test\n";
        assert!(Manifest::parse_csv(train_without_pair, None).is_err());

        let bad_mos = "video_id,path,mos,role,pair_path\n\
                       a,p,,train,x\nb,q,,test,\n";
        assert!(Manifest::parse_csv(bad_mos, None).is_err());

        let bad_header = "id,path,mos,role\na,p,1.0,test\n";
        assert!(Manifest::parse_csv(bad_header, None).is_err());
    }

    #[test]
    fn forced_predictions_give_perfect_correlation() {
        let m = Manifest::parse_csv(GOOD_MANIFEST, None).unwrap();
        let report = evaluate_with_scorer(&m, |e| Ok(e.mos.unwrap())).unwrap();
        assert_eq!(report.n, 3);
        assert_eq!(report.lcc, 1.0);
        assert_eq!(report.srocc, 1.0);
        assert!(report.summary_line().starts_with("3,1.0,1.0"));
    }

    #[test]
    fn scorer_failure_fails_the_whole_report() {
        let m = Manifest::parse_csv(GOOD_MANIFEST, None).unwrap();
        let mut calls = 0;
        let result = evaluate_with_scorer(&m, |e| {
            calls += 1;
            if e.video_id == "clip_b" {
                Err(Error::Scoring("boom".into()))
            } else {
                Ok(1.0)
            }
        });
        assert!(result.is_err());
        assert_eq!(calls, 2, "should stop at the first failure");
    }

    #[test]
    fn fewer_than_two_tests_is_an_error() {
        let single = "video_id,path,mos,role,pair_path\n\
                      a,p,,train,x\nb,q,1.0,test,\n";
        let m = Manifest::parse_csv(single, None).unwrap();
        assert!(evaluate_with_scorer(&m, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn summary_line_and_table_layout() {
        let report = CorrelationReport {
            lcc: -0.5,
            srocc: 0.25,
            n: 2,
            per_video: vec![
                PerVideo { video_id: "a".into(), predicted: 4.0, mos: 3.0 },
                PerVideo { video_id: "b".into(), predicted: 4.5, mos: 1.0 },
            ],
        };
        assert_eq!(report.summary_line(), "2,-0.5,0.25,0.5,0.25");
        assert_eq!(
            report.to_csv_table(),
            "video_id,predicted,mos\na,4.0,3.0\nb,4.5,1.0\n"
        );
    }

    #[test]
    fn reference_targets_are_recorded() {
        assert_eq!(ECVQ_REFERENCE_LCC, 0.5089);
        assert_eq!(ECVQ_REFERENCE_SROCC, 0.5209);
        assert_eq!(ECVQ_REFERENCE_TOLERANCE, 0.05);
    }

    fn textured_video(t: usize, h: usize, w: usize, salt: usize) -> FrameSequence {
        let shape = Shape4::new(1, 1, h, w);
        let frames = (0..t)
            .map(|i| {
                let values = (0..h * w)
                    .map(|p| ((p * 7 + i * 13 + salt * 29) % 23) as f64 / 22.0)
                    .collect();
                Tensor4::new(shape, values).unwrap()
            })
            .collect();
        FrameSequence::new(frames, ChannelMode::Luma).unwrap()
    }

    #[test]
    fn end_to_end_manifest_evaluation_runs() {
        let dir = tempfile::tempdir().unwrap();
        let original = textured_video(2, 8, 8, 0);
        let spec = DistortionSpec { kind: DistortionKind::Awgn, severity: 0.1, seed: 1 };
        let distorted = apply_distortion(&original, &spec).unwrap();
        write_sequence(&original, &dir.path().join("orig"), VideoFormat::PngDir).unwrap();
        write_sequence(&distorted, &dir.path().join("dist"), VideoFormat::PngDir).unwrap();
        for (i, sigma) in [0.02, 0.05, 0.15].iter().enumerate() {
            let spec = DistortionSpec { kind: DistortionKind::Awgn, severity: *sigma, seed: 7 };
            let test_video = apply_distortion(&textured_video(2, 8, 8, 1), &spec).unwrap();
            write_sequence(&test_video, &dir.path().join(format!("t{i}")), VideoFormat::PngDir)
                .unwrap();
        }
        let manifest_text = "video_id,path,mos,role,pair_path\n\
                             pair,orig,,train,dist\n\
                             v0,t0,4.0,test,\n\
                             v1,t1,3.0,test,\n\
                             v2,t2,1.0,test,\n";
        let manifest_path = dir.path().join("manifest.csv");
        std::fs::write(&manifest_path, manifest_text).unwrap();
        let manifest = Manifest::load(&manifest_path).unwrap();

        let net_cfg = NetworkConfig { encoder_channels: vec![4, 8], ..NetworkConfig::default() };
        let train_cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let report = evaluate_manifest(&manifest, &net_cfg, &train_cfg).unwrap();
        assert_eq!(report.n, 3);
        assert!(report.lcc.abs() <= 1.0);
        assert!(report.srocc.abs() <= 1.0);
        assert_eq!(report.per_video.len(), 3);
        assert!(report.per_video.iter().all(|r| r.predicted.is_finite()));
    }

    #[test]
    fn missing_video_fails_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let manifest_text = "video_id,path,mos,role,pair_path\n\
                             pair,orig,,train,dist\n\
                             v0,t0,4.0,test,\n\
                             v1,missing,3.0,test,\n";
        std::fs::write(dir.path().join("manifest.csv"), manifest_text).unwrap();
        let manifest = Manifest::load(&dir.path().join("manifest.csv")).unwrap();
        let net_cfg = NetworkConfig { encoder_channels: vec![4, 8], ..NetworkConfig::default() };
        assert!(evaluate_manifest(&manifest, &net_cfg, &TrainConfig::default()).is_err());
    }
}
