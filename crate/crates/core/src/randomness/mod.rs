//! Randomness validation of generated keys with six statistical tests.


use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Result, SkgError};

pub use tests::{
    block_frequency, cumulative_sums, igamc, longest_run, longest_run_counts, monobit, runs, serial,
    serial_pattern_length,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestId {
    Monobit,
    BlockFrequency,
    Runs,
    LongestRun,
    Serial,
    CumulativeSums,
}

impl TestId {
    pub const ALL: [TestId; 6] = [
        TestId::Monobit,
        TestId::BlockFrequency,
        TestId::Runs,
        TestId::LongestRun,
        TestId::Serial,
        TestId::CumulativeSums,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestId::Monobit => "monobit",
            TestId::BlockFrequency => "block_frequency",
            TestId::Runs => "runs",
            TestId::LongestRun => "longest_run",
            TestId::Serial => "serial",
            TestId::CumulativeSums => "cumulative_sums",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            TestId::Monobit => "Frequency (monobit) test",
            TestId::BlockFrequency => "Frequency within a block test",
            TestId::Runs => "Runs test",
            TestId::LongestRun => "Longest run of ones in a block test",
            TestId::Serial => "Serial test",
            TestId::CumulativeSums => "Cumulative sum test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_id: TestId,
    /// One value for most tests; Serial reports `(p1, p2)` and cumulative
    /// sums `(forward, backward)`.
    pub p_values: Vec<f64>,
    pub pass: bool,
}

/// How keys are grouped into test streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ConcatPolicy {
    PerKey,
    /// Consecutive keys are concatenated into streams of this many keys. A
    /// trailing group of fewer keys is dropped unless it is the only one.
    Concatenate {
        keys_per_stream: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub significance_alpha: f64,
    pub block_length_m: usize,
    /// Upper bound on the serial pattern length; the length actually used
    /// is `min(serial_m, ⌊log₂ n⌋ − 2)`.
    pub serial_m: usize,
    pub policy: ConcatPolicy,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            significance_alpha: 0.01,
            block_length_m: 128,
            serial_m: 16,
            policy: ConcatPolicy::Concatenate { keys_per_stream: 16 },
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.significance_alpha > 0.0 && self.significance_alpha < 0.1) {
            return Err(SkgError::config(format!(
                "significance must lie in (0, 0.1), got {}",
                self.significance_alpha
            )));
        }
        if self.block_length_m == 0 || self.serial_m < 2 {
            return Err(SkgError::config(
                "block length must be positive and serial length at least 2",
            ));
        }
        if let ConcatPolicy::Concatenate { keys_per_stream: 0 } = self.policy {
            return Err(SkgError::config("keys_per_stream must be positive"));
        }
        Ok(())
    }
}

/// Shortest sequence the suite evaluates with each test.
pub fn min_length(test_id: TestId, n: usize, cfg: &SuiteConfig) -> usize {
    match test_id {
        TestId::Monobit | TestId::Runs | TestId::CumulativeSums => 100,
        TestId::BlockFrequency => cfg.block_length_m.max(100),
        TestId::LongestRun => 128,
        TestId::Serial => 1 << (serial_pattern_length(n, cfg.serial_m) + 2),
    }
}

/// Runs one test, reporting [`SkgError::NotApplicable`] below the minimum
/// length.
pub fn run_test(test_id: TestId, bits: &Bits, cfg: &SuiteConfig) -> Result<TestResult> {
    tests::require(test_id.as_str(), bits, min_length(test_id, bits.len(), cfg))?;
    let p_values = match test_id {
        TestId::Monobit => vec![monobit(bits)?],
        TestId::BlockFrequency => vec![block_frequency(bits, cfg.block_length_m)?],
        TestId::Runs => vec![runs(bits)?],
        TestId::LongestRun => vec![longest_run(bits)?],
        TestId::Serial => {
            let (a, b) = serial(bits, serial_pattern_length(bits.len(), cfg.serial_m))?;
            vec![a, b]
        }
        TestId::CumulativeSums => {
            let (a, b) = cumulative_sums(bits)?;
            vec![a, b]
        }
    };
    let pass = p_values.iter().all(|&p| p >= cfg.significance_alpha);
    Ok(TestResult {
        test_id,
        p_values,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub test: TestId,
    pub name: String,
    /// `None` when the test applied to no stream.
    pub success_rate: Option<f64>,
    pub passed: usize,
    pub applicable: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    /// Indices of the keys forming this stream.
    pub keys: Vec<usize>,
    pub bits: usize,
    /// Results in [`TestId::ALL`] order; `None` marks a test that does not
    /// apply at this length.
    pub results: Vec<Option<TestResult>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub keys_in: usize,
    pub keys_used: usize,
    pub rows: Vec<SuiteRow>,
    pub streams: Vec<StreamResult>,
}

fn group_keys(n_keys: usize, policy: ConcatPolicy) -> Vec<Vec<usize>> {
    match policy {
        ConcatPolicy::PerKey => (0..n_keys).map(|i| vec![i]).collect(),
        ConcatPolicy::Concatenate { keys_per_stream } => {
            let idx: Vec<usize> = (0..n_keys).collect();
            if n_keys < keys_per_stream {
                return vec![idx];
            }
            idx.chunks_exact(keys_per_stream).map(<[usize]>::to_vec).collect()
        }
    }
}

pub fn run_suite(keys: &[Bits], cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let Some(first) = keys.first() else {
        return Err(SkgError::data("randomness suite needs at least one key"));
    };
    if let Some((i, k)) = keys.iter().enumerate().find(|(_, k)| k.len() != first.len()) {
        return Err(SkgError::data(format!(
            "key {i} has {} bits, expected {}",
            k.len(),
            first.len()
        )));
    }
    let groups = group_keys(keys.len(), cfg.policy);
    let streams: Vec<StreamResult> = groups
        .into_par_iter()
        .map(|group| {
            let mut stream = Bits::zeros(0);
            for &i in &group {
                stream.extend_from(&keys[i]);
            }
            let results = TestId::ALL
                .iter()
                .map(|&t| match run_test(t, &stream, cfg) {
                    Ok(r) => Ok(Some(r)),
                    Err(SkgError::NotApplicable { .. }) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StreamResult {
                keys: group,
                bits: stream.len(),
                results,
            })
        })
        .collect::<Result<_>>()?;
    let rows = TestId::ALL
        .iter()
        .enumerate()
        .map(|(ti, &test)| {
            let applicable: Vec<bool> = streams
                .iter()
                .filter_map(|s| s.results[ti].as_ref().map(|r| r.pass))
                .collect();
            let passed = applicable.iter().filter(|&&p| p).count();
            SuiteRow {
                test,
                name: test.display_name().to_string(),
                success_rate: (!applicable.is_empty()).then(|| passed as f64 / applicable.len() as f64),
                passed,
                applicable: applicable.len(),
            }
        })
        .collect();
    Ok(SuiteReport {
        config: *cfg,
        keys_in: keys.len(),
        keys_used: streams.iter().map(|s| s.keys.len()).sum(),
        rows,
        streams,
    })
}

impl SuiteReport {
    pub fn success_rate(&self, test: TestId) -> Option<f64> {
        self.rows.iter().find(|r| r.test == test).and_then(|r| r.success_rate)
    }

    /// Test name to success rate, plus the grouping policy.
    pub fn table_json(&self) -> serde_json::Value {
        let rates: serde_json::Map<String, serde_json::Value> = self
            .rows
            .iter()
            .map(|r| (r.name.clone(), serde_json::json!(r.success_rate)))
            .collect();
        serde_json::json!({
            "policy": self.config.policy,
            "significance_alpha": self.config.significance_alpha,
            "keys_in": self.keys_in,
            "keys_used": self.keys_used,
            "streams": self.streams.len(),
            "stream_bits": self.streams.first().map(|s| s.bits),
            "success_rates": rates,
            "tests": self.rows,
        })
    }

    /// One line per stream and test: `stream,first_key,last_key,test,p1,p2,pass`.
    /// Tests with a single p-value leave `p2` empty; inapplicable tests
    /// leave both p-values empty and report `pass` as `na`.
    pub fn pvalues_csv(&self) -> String {
        let mut out = String::from("stream,first_key,last_key,bits,test,p1,p2,pass\n");
        for (si, s) in self.streams.iter().enumerate() {
            let (lo, hi) = (s.keys[0], *s.keys.last().unwrap());
            for (ti, r) in s.results.iter().enumerate() {
                let name = TestId::ALL[ti].as_str();
                match r {
                    Some(r) => {
                        let p2 = r.p_values.get(1).map(|p| format!("{p}")).unwrap_or_default();
                        let _ = writeln!(
                            out,
                            "{si},{lo},{hi},{},{name},{},{p2},{}",
                            s.bits, r.p_values[0], r.pass
                        );
                    }
                    None => {
                        let _ = writeln!(out, "{si},{lo},{hi},{},{name},,,na", s.bits);
                    }
                }
            }
        }
        out
    }
}
