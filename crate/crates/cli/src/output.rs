//! Run directory: config echo, JSON summaries, CSV tables and run metadata.

use std::fs;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;

pub struct RunDir {
    root: PathBuf,
    command: &'static str,
    started: Instant,
    files: Vec<String>,
    alarms: Vec<String>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    unix_time: u64,
    wall_time_s: f64,
    threads: usize,
    files: &'a [String],
    alarms: &'a [String],
    warnings: &'a [String],
}

pub type IoResult<T> = std::result::Result<T, String>;

impl RunDir {
    pub fn create(cfg: &RunConfig, command: &'static str) -> IoResult<Self> {
        let root = cfg.output_dir.clone();
        fs::create_dir_all(&root).map_err(|e| format!("cannot create {}: {e}", root.display()))?;
        let mut dir = RunDir {
            root,
            command,
            started: Instant::now(),
            files: Vec::new(),
            alarms: Vec::new(),
            warnings: Vec::new(),
        };
        let echo = toml::to_string(cfg).map_err(|e| format!("cannot serialize the configuration: {e}"))?;
        dir.write_text("config.toml", &echo)?;
        Ok(dir)
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> IoResult<()> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> IoResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| format!("cannot serialize {name}: {e}"))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> IoResult<()> {
        let path = self.path(name);
        let fail = |e: csv::Error| format!("cannot write {}: {e}", path.display());
        let mut w = csv::Writer::from_path(&path).map_err(fail)?;
        for r in rows {
            w.serialize(r).map_err(fail)?;
        }
        w.flush().map_err(|e| format!("cannot write {}: {e}", path.display()))
    }

    /// A failure that makes the run exit nonzero.
    pub fn alarm(&mut self, message: impl Into<String>) {
        self.alarms.push(message.into());
    }

    /// A quality flag that does not fail the run.
    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        eprintln!("warning: {m}");
        self.warnings.push(m);
    }

    pub fn finish(mut self) -> IoResult<()> {
        let files = std::mem::take(&mut self.files);
        let alarms = std::mem::take(&mut self.alarms);
        let warnings = std::mem::take(&mut self.warnings);
        let meta = Metadata {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            files: &files,
            alarms: &alarms,
            warnings: &warnings,
        };
        self.json("metadata.json", &meta)?;
        for f in &files {
            println!("{}", self.root.join(f).display());
        }
        Ok(())
    }
}

/// File-name tag such as `g1.5_n128`.
pub fn tag(parts: &[(&str, f64)]) -> String {
    parts
        .iter()
        .map(|(k, v)| format!("{k}{v}"))
        .collect::<Vec<_>>()
        .join("_")
}
