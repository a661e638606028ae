//! SDPA sparse text format, for cross-checking programs with external solvers.
//!
//! ```text
//! "comment lines start with a quote or an asterisk
//! m
//! nBLOCKS
//! blockstruct        (negative size = diagonal block)
//! c_1 ... c_m
//! matno blkno i j value      (1-based, upper triangle)
//! ```
//!
//! The encoded problem is `min cᵀx s.t. Σ x_i F_i − F_0 ⪰ 0`. Linear rows of a
//! program become one trailing diagonal block. Only real programs are written;
//! embed complex ones with [`ConeProgram::to_real`] first.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::program::{sparse_to_dense, ConeProgram, GroupKind, Sparse, Term};
use crate::error::{Error, Result};

fn push_upper(out: &mut String, matno: usize, blkno: usize, m: &DMatrix<f64>) {
    for j in 0..m.ncols() {
        for i in 0..=j {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{matno} {blkno} {} {} {v:e}", i + 1, j + 1);
            }
        }
    }
}

pub fn write_sdpa(p: &ConeProgram<f64>) -> String {
    let m = p.num_vars();
    let nrows = p.rows.len();
    let nblocks = p.blocks.len() + usize::from(nrows > 0);
    let mut out = String::new();
    let _ = writeln!(out, "\"exported cone program: {} variables, {} lmi blocks, {} rows", m, p.blocks.len(), nrows);
    let _ = writeln!(out, "{m}");
    let _ = writeln!(out, "{nblocks}");
    let mut dims: Vec<String> = p.blocks.iter().map(|b| b.dim.to_string()).collect();
    if nrows > 0 {
        dims.push(format!("-{nrows}"));
    }
    let _ = writeln!(out, "{}", dims.join(" "));
    let _ = writeln!(out, "{}", p.objective.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>().join(" "));

    for (b, blk) in p.blocks.iter().enumerate() {
        push_upper(&mut out, 0, b + 1, &(-&blk.constant));
        let mut per_var: Vec<DMatrix<f64>> = Vec::new();
        let mut touched = vec![false; m];
        per_var.resize(m, DMatrix::zeros(0, 0));
        let mut add = |i: usize, mat: DMatrix<f64>| {
            if touched[i] {
                per_var[i] += mat;
            } else {
                per_var[i] = mat;
                touched[i] = true;
            }
        };
        for t in &blk.terms {
            match t {
                Term::Congruence { group, coeff, map } => {
                    let g = &p.groups[*group];
                    if let GroupKind::Matrix { dim, basis } = &g.kind {
                        for (a, e) in basis.iter().enumerate() {
                            let ed = sparse_to_dense(e, *dim);
                            let f = match map {
                                Some(bm) => &**bm * ed * bm.transpose(),
                                None => ed,
                            };
                            add(g.offset + a, f * *coeff);
                        }
                    }
                }
                Term::Single { var, matrix } => add(*var, sparse_to_dense(matrix, blk.dim)),
            }
        }
        for (i, f) in per_var.iter().enumerate() {
            if touched[i] {
                push_upper(&mut out, i + 1, b + 1, f);
            }
        }
    }
    if nrows > 0 {
        let blkno = p.blocks.len() + 1;
        for (j, row) in p.rows.iter().enumerate() {
            if row.constant != 0.0 {
                let _ = writeln!(out, "0 {blkno} {} {} {:e}", j + 1, j + 1, -row.constant);
            }
            for &(i, a) in &row.coeffs {
                let _ = writeln!(out, "{} {blkno} {} {} {a:e}", i + 1, j + 1, j + 1);
            }
        }
    }
    out
}

/// Parses SDPA sparse text into a program with one scalar variable per column.
pub fn read_sdpa(text: &str) -> Result<ConeProgram<f64>> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
    let clean = |l: &str| l.replace([',', '{', '}', '(', ')'], " ");
    let parse_usize = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
    let first_tok = |l: &str| clean(l).split_whitespace().next().unwrap_or("").to_string();
    let m = parse_usize(&first_tok(next("variable count")?))?;
    let nb = parse_usize(&first_tok(next("block count")?))?;
    let dims: Vec<i64> = clean(next("block structure")?)
        .split_whitespace()
        .take(nb)
        .map(|s| s.parse::<i64>().map_err(|e| Error::Parse(format!("block size `{s}`: {e}"))))
        .collect::<Result<_>>()?;
    if dims.len() != nb || dims.contains(&0) {
        return Err(Error::Parse("bad block structure".into()));
    }
    let mut cvec: Vec<f64> = Vec::with_capacity(m);
    while cvec.len() < m {
        for tok in clean(next("objective")?).split_whitespace() {
            cvec.push(tok.parse::<f64>().map_err(|e| Error::Parse(format!("objective `{tok}`: {e}")))?);
        }
    }
    cvec.truncate(m);

    // entries[block][matno]
    let mut entries: Vec<Vec<Sparse<f64>>> = vec![vec![Vec::new(); m + 1]; nb];
    for line in lines {
        let toks: Vec<String> = clean(line).split_whitespace().map(String::from).collect();
        if toks.len() < 5 {
            return Err(Error::Parse(format!("short entry line `{line}`")));
        }
        let matno = parse_usize(&toks[0])?;
        let blk = parse_usize(&toks[1])?;
        let i = parse_usize(&toks[2])?;
        let j = parse_usize(&toks[3])?;
        let v: f64 = toks[4].parse().map_err(|e| Error::Parse(format!("value `{}`: {e}", toks[4])))?;
        if matno > m || blk == 0 || blk > nb || i == 0 || j == 0 {
            return Err(Error::Parse(format!("entry out of range `{line}`")));
        }
        let n = dims[blk - 1].unsigned_abs() as usize;
        if i > n || j > n {
            return Err(Error::Parse(format!("entry outside block `{line}`")));
        }
        let e = &mut entries[blk - 1][matno];
        e.push((i - 1, j - 1, v));
        if i != j {
            e.push((j - 1, i - 1, v));
        }
    }

    let mut p = ConeProgram::<f64>::new();
    for i in 0..m {
        let g = p.add_scalar(&format!("x{}", i + 1));
        let off = p.offset(g);
        p.objective[off] = cvec[i];
    }
    for (b, &d) in dims.iter().enumerate() {
        if d > 0 {
            let n = d as usize;
            let constant = -sparse_to_dense(&entries[b][0], n);
            let terms = (1..=m)
                .filter(|&i| !entries[b][i].is_empty())
                .map(|i| Term::Single { var: i - 1, matrix: entries[b][i].clone() })
                .collect();
            p.add_lmi(&format!("block{}", b + 1), constant, terms)?;
        } else {
            let n = d.unsigned_abs() as usize;
            for r in 0..n {
                let diag = |mat: usize| -> f64 {
                    entries[b][mat].iter().filter(|e| e.0 == r && e.1 == r).map(|e| e.2).sum()
                };
                if entries[b].iter().flatten().any(|e| e.0 != e.1) {
                    return Err(Error::Parse(format!("off-diagonal entry in diagonal block {}", b + 1)));
                }
                let coeffs = (1..=m).map(|i| (i - 1, diag(i))).filter(|c| c.1 != 0.0).collect();
                p.add_row(&format!("block{}_{}", b + 1, r + 1), -diag(0), coeffs)?;
            }
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_classic_example() {
        // SDPA manual example 1
        let text = "\"Example 1: mDim = 3, nBLOCK = 1, {2}\n3 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n{48, -8, 20}\n\
0 1 1 1 -11\n0 1 2 2 23\n1 1 1 1 10\n1 1 1 2 4\n2 1 2 2 -8\n3 1 1 2 -8\n3 1 2 2 -2\n";
        let p = read_sdpa(text).unwrap();
        assert_eq!(p.num_vars(), 3);
        assert_eq!(p.objective, vec![48.0, -8.0, 20.0]);
        assert_eq!(p.blocks[0].constant[(0, 0)], 11.0);
    }
}
