//! Output plumbing shared by all subcommands: CSV tables, key = value
//! summaries, and a deterministic work-stealing map for sweeps.
//!
//! CSV files use a header row, `\n` line endings, `.` decimal points
//! via Rust's locale-independent float formatting, and RFC-4180 quoting
//! for the rare field containing a comma or quote. Summaries are plain
//! `key = value` lines, one record per file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use sidwave::{Error, Result};

/// Shortest round-trip decimal form; `inf` / `NaN` appear verbatim.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn quote_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Render header + rows as CSV text.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let quoted: Vec<String> = row.iter().map(|f| quote_field(f)).collect();
        out.push_str(&quoted.join(","));
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::Config(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let mut file = fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_text(path, &csv_text(header, rows))
}

/// Resolve an output file name against the output directory.
pub fn out_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}

/// A summary record: ordered `key = value` lines.
#[derive(Debug, Default)]
pub struct Summary {
    lines: Vec<String>,
}

impl Summary {
    pub fn new() -> Self {
        Summary { lines: Vec::new() }
    }

    pub fn push_raw(&mut self, line: String) {
        self.lines.push(line);
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn extend_raw(&mut self, lines: impl IntoIterator<Item = String>) {
        self.lines.extend(lines);
    }

    pub fn text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.text())
    }

    pub fn print(&self) {
        print!("{}", self.text());
    }
}

/// Apply `f` to every item on up to `jobs` threads, returning results
/// in input order regardless of scheduling.
pub fn parallel_map<T, U, F>(items: &[T], jobs: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<U>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= items.len() {
                            break;
                        }
                        local.push((i, f(&items[i])));
                    }
                    local
                })
            })
            .collect();
        for worker in workers {
            for (i, value) in worker.join().expect("sweep worker panicked") {
                slots[i] = Some(value);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("slot filled")).collect()
}
