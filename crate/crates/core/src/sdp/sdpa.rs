//! Sparse SDPA (`.dat-s`) files.
//!
//! The format describes `min c^T x  s.t.  sum_i F_i x_i - F_0 >= 0`. Lines starting with `"` or
//! `*` before the data are comments. Block sizes are negative for diagonal blocks and entries
//! read `<matno> <block> <i> <j> <value>` with 1-based upper-triangular indices.

use super::{Lmi, LmiBlock};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpaEntry {
    /// 0 for the constant matrix `F_0`, otherwise the 1-based variable index.
    pub matrix: usize,
    /// 1-based block index.
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpaProblem {
    /// Comment lines without their leading marker.
    pub comments: Vec<String>,
    pub num_vars: usize,
    pub block_sizes: Vec<i64>,
    pub objective: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

impl SdpaProblem {
    /// Converts an LMI, turning each equality into two rows of a diagonal block.
    pub fn from_lmi(lmi: &Lmi, comments: Vec<String>) -> Self {
        let mut blocks: Vec<LmiBlock> = lmi.blocks.clone();
        if !lmi.equalities.is_empty() {
            let idx = match blocks.iter().position(|b| b.diagonal) {
                Some(i) => i,
                None => {
                    blocks.push(LmiBlock::new(0, true));
                    blocks.len() - 1
                }
            };
            let blk = &mut blocks[idx];
            for eq in &lmi.equalities {
                for sign in [1.0, -1.0] {
                    let r = blk.size;
                    blk.size += 1;
                    for &(i, c) in &eq.coeffs {
                        blk.push(Some(i), r, r, sign * c);
                    }
                    blk.push(None, r, r, -sign * eq.rhs);
                }
            }
        }
        let mut entries = Vec::new();
        for (b, blk) in blocks.iter().enumerate() {
            for e in &blk.entries {
                let (matrix, value) = match e.var {
                    None => (0, -e.value),
                    Some(i) => (i + 1, e.value),
                };
                entries.push(SdpaEntry { matrix, block: b + 1, row: e.row + 1, col: e.col + 1, value });
            }
        }
        entries.sort_by(|a, b| (a.matrix, a.block, a.row, a.col).cmp(&(b.matrix, b.block, b.row, b.col)));
        // Merge duplicates so every (matrix, block, row, col) appears once.
        let mut merged: Vec<SdpaEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if (last.matrix, last.block, last.row, last.col) == (e.matrix, e.block, e.row, e.col) => {
                    last.value += e.value;
                }
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.value != 0.0);
        Self {
            comments,
            num_vars: lmi.num_vars,
            block_sizes: blocks.iter().map(|b| if b.diagonal { -(b.size as i64) } else { b.size as i64 }).collect(),
            objective: lmi.objective.clone(),
            entries: merged,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "\"{c}");
        }
        let _ = writeln!(s, "{}", self.num_vars);
        let _ = writeln!(s, "{}", self.block_sizes.len());
        let _ = writeln!(s, "{}", join(self.block_sizes.iter().map(|b| b.to_string())));
        let _ = writeln!(s, "{}", join(self.objective.iter().map(|v| format!("{v:e}"))));
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {} {} {:e}", e.matrix, e.block, e.row, e.col, e.value);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut comments = Vec::new();
        let mut lines = text.lines().peekable();
        while let Some(l) = lines.peek() {
            if let Some(rest) = l.strip_prefix('"').or_else(|| l.strip_prefix('*')) {
                comments.push(rest.to_string());
                lines.next();
            } else {
                break;
            }
        }
        let mut tokens = lines.flat_map(|l| {
            l.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>()
        });
        let mut next = |what: &str| tokens.next().ok_or_else(|| Error::Parse(format!("SDPA file ends before {what}")));
        let num_vars: usize = parse_num(&next("the variable count")?)?;
        let nblocks: usize = parse_num(&next("the block count")?)?;
        let mut block_sizes = Vec::with_capacity(nblocks);
        for _ in 0..nblocks {
            let b: i64 = parse_num(&next("the block sizes")?)?;
            if b == 0 {
                return Err(Error::Parse("zero block size".into()));
            }
            block_sizes.push(b);
        }
        let mut objective = Vec::with_capacity(num_vars);
        for _ in 0..num_vars {
            objective.push(parse_num(&next("the objective")?)?);
        }
        let mut entries = Vec::new();
        while let Some(t) = tokens.next() {
            let matrix: usize = parse_num(&t)?;
            let mut field = |what: &str| tokens.next().ok_or_else(|| Error::Parse(format!("truncated entry: missing {what}")));
            let block: usize = parse_num(&field("block")?)?;
            let row: usize = parse_num(&field("row")?)?;
            let col: usize = parse_num(&field("column")?)?;
            let value: f64 = parse_num(&field("value")?)?;
            if matrix > num_vars || block == 0 || block > nblocks {
                return Err(Error::Parse(format!("entry {matrix} {block} {row} {col} out of range")));
            }
            let size = block_sizes[block - 1].unsigned_abs() as usize;
            if row == 0 || col == 0 || row > size || col > size || (block_sizes[block - 1] < 0 && row != col) {
                return Err(Error::Parse(format!("entry {matrix} {block} {row} {col} out of range")));
            }
            entries.push(SdpaEntry { matrix, block, row, col, value });
        }
        Ok(Self { comments, num_vars, block_sizes, objective, entries })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn join(it: impl Iterator<Item = String>) -> String {
    it.collect::<Vec<_>>().join(" ")
}

fn parse_num<T: std::str::FromStr>(t: &str) -> Result<T> {
    t.parse().map_err(|_| Error::Parse(format!("invalid number '{t}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::Equality;

    fn sample() -> Lmi {
        let mut lmi = Lmi::new(2);
        lmi.objective = vec![1.0, -0.25];
        let mut b = LmiBlock::new(2, false);
        b.push(Some(0), 0, 0, 1.0);
        b.push(Some(1), 1, 1, 1.0);
        b.push(None, 0, 1, 1.0 / 3.0);
        lmi.blocks.push(b);
        lmi.equalities.push(Equality { coeffs: vec![(0, 1.0), (1, 1.0)], rhs: 2.0 });
        lmi
    }

    #[test]
    fn layout_and_sign_convention() {
        let p = SdpaProblem::from_lmi(&sample(), vec!["sample".into()]);
        assert_eq!(p.block_sizes, vec![2, -2]);
        let text = p.to_text();
        assert!(text.starts_with("\"sample\n2\n2\n2 -2\n"));
        // Constant matrices are negated.
        assert!(p.entries.iter().any(|e| e.matrix == 0 && e.block == 1 && e.value == -1.0 / 3.0));
        assert!(p.entries.iter().any(|e| e.matrix == 0 && e.block == 2 && e.row == 1 && e.value == 2.0));
        assert!(p.entries.iter().any(|e| e.matrix == 0 && e.block == 2 && e.row == 2 && e.value == -2.0));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let text = SdpaProblem::from_lmi(&sample(), vec!["a".into(), " b".into()]).to_text();
        let again = SdpaProblem::parse(&text).unwrap().to_text();
        assert_eq!(text, again);
    }

    #[test]
    fn accepts_punctuated_block_line() {
        let p = SdpaProblem::parse("*c\n1\n2\n{2, -1}\n1.0\n1 1 1 1 1\n1 2 1 1 1\n").unwrap();
        assert_eq!(p.block_sizes, vec![2, -1]);
        assert_eq!(p.entries.len(), 2);
        assert!(SdpaProblem::parse("1\n1\n-1\n1\n1 1 1 2 1\n").is_err());
        assert!(SdpaProblem::parse("1\n1\n2\n").is_err());
    }
}
