//! Subprocess adapter for no-reference scorers.
//!
//! Protocol: the scorer is run as `command args... <image-path>`. It must
//! exit with status 0 and print a single finite decimal number on the first
//! line of standard output. Anything after the first line is ignored.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use thiserror::Error;
use wait_timeout::ChildExt;

use crate::metrics::{MetricId, MetricKind};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer command is empty")]
    EmptyCommand,
    #[error("scorer timeout must be positive")]
    ZeroTimeout,
    #[error("metric {0} is not a no-reference metric")]
    NotNoReference(String),
    #[error("failed to launch scorer {program:?}: {source}")]
    Spawn {
        program: String,
        source: std::io::Error,
    },
    #[error("external scorer failed with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("unparseable score {0:?}")]
    Unparseable(String),
    #[error("external scorer timed out after {0:?}")]
    Timeout(Duration),
    #[error("i/o error talking to scorer: {0}")]
    Io(#[from] std::io::Error),
}

impl ScorerError {
    /// Short category label used in exclusion logs.
    pub fn category(&self) -> &'static str {
        match self {
            ScorerError::EmptyCommand
            | ScorerError::ZeroTimeout
            | ScorerError::NotNoReference(_) => "invalid-scorer",
            ScorerError::Spawn { .. } | ScorerError::Failed { .. } => "external-scorer-failed",
            ScorerError::Unparseable(_) => "unparseable-score",
            ScorerError::Timeout(_) => "scorer-timeout",
            ScorerError::Io(_) => "scorer-io",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScorer {
    metric: MetricId,
    program: String,
    args: Vec<String>,
    timeout: Duration,
}

impl ExternalScorer {
    /// `command` is the executable followed by its fixed arguments.
    pub fn new(
        metric: MetricId,
        command: Vec<String>,
        timeout: Duration,
    ) -> Result<Self, ScorerError> {
        if metric.kind() != MetricKind::NoReference {
            return Err(ScorerError::NotNoReference(metric.name().to_string()));
        }
        let mut parts = command.into_iter();
        let program = parts
            .next()
            .filter(|p| !p.is_empty())
            .ok_or(ScorerError::EmptyCommand)?;
        if timeout.is_zero() {
            return Err(ScorerError::ZeroTimeout);
        }
        Ok(Self {
            metric,
            program,
            args: parts.collect(),
            timeout,
        })
    }

    pub fn metric(&self) -> &MetricId {
        &self.metric
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn score(&self, image_path: &Path) -> Result<f64, ScorerError> {
        score_external(self, image_path)
    }
}

/// Runs `scorer` on the image at `image_path` and parses its score.
pub fn score_external(scorer: &ExternalScorer, image_path: &Path) -> Result<f64, ScorerError> {
    let mut child = Command::new(&scorer.program)
        .args(&scorer.args)
        .arg(image_path)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| ScorerError::Spawn {
            program: scorer.program.clone(),
            source,
        })?;

    // Drain both pipes concurrently so a chatty scorer cannot block on a full pipe.
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let mut stderr = child.stderr.take().expect("stderr is piped");
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let status = match child.wait_timeout(scorer.timeout)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ScorerError::Timeout(scorer.timeout));
        }
    };
    let stdout = out_reader.join().expect("stdout reader panicked")?;
    let stderr = err_reader.join().expect("stderr reader panicked");

    if !status.success() {
        let stderr = String::from_utf8_lossy(&stderr).trim().to_string();
        return Err(ScorerError::Failed {
            status: status.to_string(),
            stderr,
        });
    }
    parse_score(&String::from_utf8_lossy(&stdout))
}

/// Parses the first line of scorer output as one finite number.
pub fn parse_score(output: &str) -> Result<f64, ScorerError> {
    let line = output.lines().next().unwrap_or("").trim();
    match line.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ScorerError::Unparseable(line.to_string())),
    }
}
