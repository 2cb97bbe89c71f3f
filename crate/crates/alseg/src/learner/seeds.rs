use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Pos;

/// A labeled voxel. Positions are finest-level coordinates; `level` records
/// where the oracle picked it, if known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed {
    pub pos: Pos,
    pub label: i8,
    pub level: Option<usize>,
}

impl Seed {
    pub fn new(pos: Pos, label: i8) -> Self {
        Seed { pos, label, level: None }
    }

    pub fn positive(pos: Pos) -> Self {
        Self::new(pos, 1)
    }

    pub fn negative(pos: Pos) -> Self {
        Self::new(pos, -1)
    }

    /// `x y z ±1`, followed by the level when present.
    pub fn to_line(&self) -> String {
        let sign = if self.label > 0 { "+1" } else { "-1" };
        let [x, y, z] = self.pos;
        match self.level {
            Some(l) => format!("{x} {y} {z} {sign} {l}"),
            None => format!("{x} {y} {z} {sign}"),
        }
    }
}

fn parse_line(line: &str, number: usize) -> Result<Seed> {
    let err = |reason: String| Error::SeedParse { line: number, reason };
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 4 && tokens.len() != 5 {
        return Err(err(format!("expected `x y z label [level]`, got {} fields", tokens.len())));
    }
    let mut pos = [0usize; 3];
    for (p, t) in pos.iter_mut().zip(&tokens[..3]) {
        *p = t.parse().map_err(|_| err(format!("bad coordinate `{t}`")))?;
    }
    let label = match tokens[3] {
        "+1" | "1" => 1,
        "-1" => -1,
        t => return Err(err(format!("label `{t}` is not +1 or -1"))),
    };
    let level = match tokens.get(4) {
        None => None,
        Some(t) => Some(t.parse().map_err(|_| err(format!("bad level `{t}`")))?),
    };
    Ok(Seed { pos, label, level })
}

/// Parses seed lines; `#` starts a comment, blank lines are skipped.
pub fn parse_seeds(text: &str) -> Result<Vec<Seed>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_line(line, i + 1)?);
    }
    Ok(out)
}

/// One line per seed, each terminated by a newline.
pub fn emit_seeds(seeds: &[Seed]) -> String {
    let mut s = String::new();
    for seed in seeds {
        let _ = writeln!(s, "{}", seed.to_line());
    }
    s
}

pub fn read_seed_file(path: &Path) -> Result<Vec<Seed>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_seeds(&text)
}

pub fn write_seed_file(path: &Path, seeds: &[Seed]) -> Result<()> {
    std::fs::write(path, emit_seeds(seeds)).map_err(|e| Error::io(path, e))
}

/// Accumulated seeds in insertion order, one label per position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedSet {
    entries: Vec<Seed>,
    labels: HashMap<Pos, i8>,
}

impl SeedSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// `Ok(true)` if the seed would be new, `Ok(false)` if it repeats an
    /// entry with the same label.
    pub fn check(&self, seed: &Seed) -> Result<bool> {
        if seed.label != 1 && seed.label != -1 {
            return Err(Error::InvalidParameter(format!("label {} is not +1 or -1", seed.label)));
        }
        match self.labels.get(&seed.pos) {
            None => Ok(true),
            Some(&l) if l == seed.label => Ok(false),
            Some(_) => Err(Error::ConflictingSeed { pos: seed.pos }),
        }
    }

    /// Adds the seed unless it is a same-label duplicate.
    pub fn insert(&mut self, seed: Seed) -> Result<bool> {
        let fresh = self.check(&seed)?;
        if fresh {
            self.labels.insert(seed.pos, seed.label);
            self.entries.push(seed);
        }
        Ok(fresh)
    }

    pub fn entries(&self) -> &[Seed] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label_of(&self, pos: Pos) -> Option<i8> {
        self.labels.get(&pos).copied()
    }

    pub fn positives(&self) -> usize {
        self.entries.iter().filter(|s| s.label > 0).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }
}
