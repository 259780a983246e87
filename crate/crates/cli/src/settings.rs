use std::fmt;
use std::path::{Path, PathBuf};

use wavegp::config::KeyValues;
use wavegp::kernel::{Composition, Covariance, KernelSpec};
use wavegp::{Error, WaveModel, WaveModelSpec};

/// Keys that steer execution but never change results; left out of the echoed config.
const EXECUTION_KEYS: [&str; 2] = ["threads", "out"];

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Config(String),
    Verification(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(Error::SingularGram { .. } | Error::CholeskyFailure { .. }) => "numeric",
            CliError::Core(_) | CliError::Config(_) => "config",
            CliError::Verification(_) => "verification",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category() {
            "numeric" => 3,
            "verification" => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) | CliError::Verification(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone)]
pub struct Settings {
    pub command: String,
    pub kv: KeyValues,
}

impl Settings {
    /// Config files in order, then command-line settings; later values win
    /// across sources, duplicates within one source are an error.
    pub fn load(command: &str, files: &[PathBuf], args: &[String]) -> CliResult<Self> {
        let mut kv = KeyValues::new();
        for path in files {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let file_kv =
                KeyValues::parse_text(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            kv.merge(file_kv);
        }
        let mut cli_kv = KeyValues::new();
        for a in args {
            cli_kv.insert_token(a)?;
        }
        kv.merge(cli_kv);
        // `kernel=<family>` is shorthand for `kernel.family=<family>`
        if let Some(fam) = kv.get("kernel").map(str::to_owned) {
            if fam != "wave" {
                if kv.contains("kernel.family") {
                    return Err(CliError::Config("both `kernel` and `kernel.family` given".into()));
                }
                kv.insert("kernel.family", fam);
            }
        }
        Ok(Settings { command: command.to_string(), kv })
    }

    pub fn threads(&self) -> CliResult<usize> {
        let n = self.kv.usize_or("threads", 0)?;
        Ok(n)
    }

    pub fn out(&self) -> Option<&Path> {
        self.kv.get("out").map(Path::new)
    }

    /// Resolved configuration as echoed in output headers.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.kv
            .iter()
            .filter(|(k, _)| !EXECUTION_KEYS.contains(k))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    pub fn reject_unknown(&self, known: impl Fn(&str) -> bool) -> CliResult<()> {
        self.kv.reject_unknown(|k| EXECUTION_KEYS.contains(&k) || known(k)).map_err(CliError::from)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.kv.get(key)
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        Ok(self.kv.require(key)?)
    }

    pub fn seed(&self) -> CliResult<u64> {
        Ok(self.kv.u64_or("seed", 0)?)
    }

    pub fn is_wave(&self) -> bool {
        self.kv.get("kernel") == Some("wave")
    }

    pub fn wave_model(&self) -> CliResult<WaveModel> {
        Ok(WaveModel::new(WaveModelSpec::from_key_values(&self.kv)?)?)
    }

    pub fn source(&self) -> CliResult<Source> {
        if self.is_wave() {
            Ok(Source::Wave(self.wave_model()?))
        } else {
            Ok(Source::Kernel(KernelSpec::from_key_values(&self.kv, "kernel.")?))
        }
    }

    /// Keys read by [`Settings::source`].
    pub fn source_key(&self, key: &str) -> bool {
        if key == "kernel" {
            return true;
        }
        if self.is_wave() {
            WaveModelSpec::accepts_key(key)
        } else {
            key.strip_prefix("kernel.").is_some_and(|k| KernelSpec::KEYS.contains(&k))
        }
    }
}

/// The covariance a subcommand works with: a plain kernel or the wave kernel.
#[derive(Debug, Clone)]
pub enum Source {
    Kernel(KernelSpec),
    Wave(WaveModel),
}

impl Source {
    /// Point dimension the source expects, if fixed.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Source::Wave(_) => Some(4),
            Source::Kernel(k) if k.composition == Composition::TransportShift => Some(2),
            Source::Kernel(_) => None,
        }
    }

    pub fn check_dim(&self, dim: usize) -> CliResult<()> {
        match self.dim() {
            Some(d) if d != dim => Err(Error::DimensionMismatch { expected: d, got: dim }.into()),
            _ => Ok(()),
        }
    }
}

impl Covariance<[f64]> for Source {
    fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Source::Kernel(k) => k.eval_slice(a, b),
            Source::Wave(m) => m.covariance(a, b),
        }
    }
}

impl Covariance<Vec<f64>> for Source {
    fn covariance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        self.covariance(a.as_slice(), b.as_slice())
    }
}

/// `a,b;c,d;...` into points of one common dimension.
pub fn parse_points(key: &str, v: &str) -> CliResult<Vec<Vec<f64>>> {
    let pts: Vec<Vec<f64>> =
        v.split(';').filter(|p| !p.trim().is_empty()).map(|p| parse_numbers(key, p)).collect::<CliResult<_>>()?;
    if pts.is_empty() {
        return Err(CliError::Config(format!("`{key}`: no points given")));
    }
    let d = pts[0].len();
    if let Some(p) = pts.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.len() }.into());
    }
    Ok(pts)
}

pub fn parse_numbers(key: &str, v: &str) -> CliResult<Vec<f64>> {
    v.split(',')
        .map(|s| {
            let x: f64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("`{key}`: expected a number, got `{}`", s.trim())))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(CliError::Config(format!("`{key}`: value must be finite")))
            }
        })
        .collect()
}

/// `v` or `lo:hi:n` (inclusive, evenly spaced).
pub fn parse_axis(key: &str, v: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        [x] => parse_numbers(key, x),
        [lo, hi, n] => {
            let lo = parse_numbers(key, lo)?;
            let hi = parse_numbers(key, hi)?;
            let n: usize = n.trim().parse().map_err(|_| CliError::Config(format!("`{key}`: bad point count `{n}`")))?;
            if lo.len() != 1 || hi.len() != 1 || n == 0 {
                return Err(CliError::Config(format!("`{key}`: expected lo:hi:n with n >= 1")));
            }
            let (lo, hi) = (lo[0], hi[0]);
            if n == 1 {
                return Ok(vec![lo]);
            }
            Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
        }
        _ => Err(CliError::Config(format!("`{key}`: expected a value or lo:hi:n, got `{v}`"))),
    }
}

pub const AXIS_NAMES: [&str; 4] = ["x", "y", "z", "t"];

/// Cartesian product of the named axes, last axis fastest.
pub fn grid(settings: &Settings, names: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    let axes: Vec<Vec<f64>> = names.iter().map(|n| parse_axis(n, settings.require(n)?)).collect::<CliResult<_>>()?;
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(out)
}
