//! Boxoban-style files: blocks of `; <id>` followed by a grid, separated by blank lines.

use super::{Level, ParseError};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoxobanError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Malformed {
        path: PathBuf,
        line: usize,
        source: ParseError,
    },
}

/// Split text into level blocks, returning each block with its first line number (1-based).
fn blocks(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        let header = line.starts_with(';');
        if line.trim().is_empty() || (header && !cur.is_empty()) {
            if !cur.is_empty() {
                out.push((start, std::mem::take(&mut cur)));
            }
            if !header {
                continue;
            }
        }
        if cur.is_empty() {
            start = i + 1;
        }
        cur.push_str(line);
        cur.push('\n');
    }
    if !cur.is_empty() {
        out.push((start, cur));
    }
    out
}

pub fn parse_boxoban_text(text: &str, path: &Path) -> Result<Vec<Level>, BoxobanError> {
    blocks(text)
        .into_iter()
        .map(|(line, block)| {
            Level::parse(&block).map_err(|source| BoxobanError::Malformed {
                path: path.to_path_buf(),
                line: line + error_line(&source).saturating_sub(1),
                source,
            })
        })
        .collect()
}

fn error_line(e: &ParseError) -> usize {
    match e {
        ParseError::Ragged { line, .. }
        | ParseError::UnknownChar { line, .. }
        | ParseError::MultipleAgents { line, .. } => *line,
        _ => 1,
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BoxobanError + '_ {
    move |source| BoxobanError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// All levels from every regular file in `dir`, files in name order, blocks in file order.
pub fn load_boxoban_dir(dir: &Path) -> Result<Vec<Level>, BoxobanError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut levels = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(io(&f))?;
        levels.extend(parse_boxoban_text(&text, &f)?);
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blocks() {
        let text = "; 0\n#####\n#@$.#\n#####\n\n; 1\n######\n#@ $.#\n######\n";
        let ls = parse_boxoban_text(text, Path::new("x")).unwrap();
        assert_eq!(ls.len(), 2);
        assert_eq!(ls[0].id, Some(0));
        assert_eq!(ls[1].id, Some(1));
    }

    #[test]
    fn reports_line() {
        let text = "; 0\n#####\n#@$.#\n#####\n\n; 1\n#####\n#@$.x\n#####\n";
        match parse_boxoban_text(text, Path::new("f.txt")) {
            Err(BoxobanError::Malformed { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }
}
