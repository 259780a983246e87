use std::io::Write;
use std::path::Path;

use crate::settings::{CliError, CliResult, Settings};

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn csv_header(settings: &Settings, columns: &[&str]) -> String {
    let mut s = format!("# wavegp {}\n# command={}\n", wavegp::VERSION, settings.command);
    for (k, v) in settings.echo() {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str(&columns.join(","));
    s.push('\n');
    s
}

pub fn csv_row(out: &mut String, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// JSON document with `version`, `command` and `config` next to `fields`.
pub fn json(settings: &Settings, fields: serde_json::Map<String, serde_json::Value>) -> String {
    let mut doc = serde_json::Map::new();
    doc.insert("version".into(), wavegp::VERSION.into());
    doc.insert("command".into(), settings.command.clone().into());
    let config: serde_json::Map<String, serde_json::Value> =
        settings.echo().into_iter().map(|(k, v)| (k, v.into())).collect();
    doc.insert("config".into(), config.into());
    doc.extend(fields);
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(doc)).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Writes to `path` through a temporary file and a rename, or to stdout.
pub fn write(path: Option<&Path>, body: &str) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Config(format!("cannot write output: {e}"));
    match path {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes()).map_err(io)?;
            stdout.flush().map_err(io)
        }
        Some(path) => {
            let name = path
                .file_name()
                .ok_or_else(|| CliError::Config(format!("`out`: not a file path: {}", path.display())))?;
            let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
            std::fs::write(&tmp, body).map_err(io)?;
            std::fs::rename(&tmp, path).map_err(|e| {
                let _ = std::fs::remove_file(&tmp);
                io(e)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, -0.0, 1.0, 0.1, 1e-300, -2.5e-7, 123456.789, 1e20, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1e-5), "1e-5");
        assert_eq!(num(0.25), "0.25");
    }
}
