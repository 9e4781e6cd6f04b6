//! Plain-text exchange formats.
//!
//! Scattering matrix: header `N G Gs`, then N rows of N `re+imj` tokens.
//! Channels: header `N L`, then one tagged row per vector (`h_RI`,
//! `h_IT1`..`h_ITL`, `d_2`..`d_L`). Blank lines and `#` comments are
//! ignored. Numbers carry 17 significant digits, so round trips are exact.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::arch::RisArchitecture;
use crate::channels::ScenarioChannels;
use crate::error::{Result, RisError};
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::solver::TargetReflections;

pub fn format_complex(z: Complex64) -> String {
    format!("{:.16e}{:+.16e}j", z.re, z.im)
}

pub fn parse_complex(token: &str) -> Option<Complex64> {
    let body = token.strip_suffix('j')?;
    // the imaginary part starts at the last sign not belonging to an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re = body[..split].parse().ok()?;
    let im = body[split..].parse().ok()?;
    Some(Complex64::new(re, im))
}

fn parse_error(line: usize, reason: impl Into<String>) -> RisError {
    RisError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_row(line: usize, tokens: &[&str], expected: usize) -> Result<Vec<Complex64>> {
    if tokens.len() != expected {
        return Err(parse_error(
            line,
            format!("expected {expected} entries, found {}", tokens.len()),
        ));
    }
    tokens
        .iter()
        .map(|t| {
            parse_complex(t).ok_or_else(|| parse_error(line, format!("bad complex token `{t}`")))
        })
        .collect()
}

fn parse_counts(line: usize, header: &str, count: usize) -> Result<Vec<usize>> {
    let v: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_error(line, format!("bad header field `{t}`")))
        })
        .collect::<Result<_>>()?;
    if v.len() != count {
        return Err(parse_error(line, format!("header needs {count} integers")));
    }
    Ok(v)
}

pub fn write_theta(arch: &RisArchitecture, theta: &ComplexMatrix) -> Result<String> {
    let n = arch.n();
    if theta.shape() != (n, n) {
        return Err(RisError::DimensionMismatch(format!(
            "Theta is {}x{} for N = {n}",
            theta.nrows(),
            theta.ncols()
        )));
    }
    let mut out = format!("{} {} {}\n", n, arch.groups(), arch.group_size());
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format_complex(theta[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    Ok(out)
}

pub fn read_theta(text: &str) -> Result<(RisArchitecture, ComplexMatrix)> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_error(1, "empty file"))?;
    let h = parse_counts(hl, header, 3)?;
    let arch = RisArchitecture::new(h[0], h[1])?;
    if arch.group_size() != h[2] {
        return Err(parse_error(
            hl,
            format!(
                "N = {} and G = {} imply Gs = {}",
                h[0],
                h[1],
                arch.group_size()
            ),
        ));
    }
    let n = arch.n();
    let mut theta = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_error(hl, format!("expected {n} rows, found {i}")))?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        for (j, z) in parse_row(ln, &tokens, n)?.into_iter().enumerate() {
            theta[(i, j)] = z;
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_error(ln, "trailing content after the last row"));
    }
    Ok((arch, theta))
}

fn tag_row(tag: &str, v: &ComplexVector) -> String {
    let mut s = String::from(tag);
    for z in v.iter() {
        s.push(' ');
        s.push_str(&format_complex(*z));
    }
    s.push('\n');
    s
}

pub fn write_channels(ch: &ScenarioChannels, targets: &TargetReflections) -> Result<String> {
    ch.validate()?;
    if targets.d.len() + 1 != ch.operators() {
        return Err(RisError::DimensionMismatch(
            "one target per non-serving operator".into(),
        ));
    }
    let mut out = format!("{} {}\n", ch.n(), ch.operators());
    out.push_str(&tag_row("h_RI", &ch.h_ri));
    for (l, h) in ch.h_it.iter().enumerate() {
        out.push_str(&tag_row(&format!("h_IT{}", l + 1), h));
    }
    for (l, d) in targets.d.iter().enumerate() {
        out.push_str(&tag_row(&format!("d_{}", l + 2), d));
    }
    Ok(out)
}

/// Parses a channel file. Rows may appear in any order; each tag exactly once.
pub fn read_channels(text: &str) -> Result<(ScenarioChannels, TargetReflections)> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_error(1, "empty file"))?;
    let h = parse_counts(hl, header, 2)?;
    let (n, l) = (h[0], h[1]);
    if n == 0 || l < 2 {
        return Err(parse_error(hl, "need N >= 1 and L >= 2"));
    }
    let mut h_ri: Option<ComplexVector> = None;
    let mut h_it: Vec<Option<ComplexVector>> = vec![None; l];
    let mut d: Vec<Option<ComplexVector>> = vec![None; l - 1];
    for (ln, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let tag = tokens[0];
        let slot = if tag == "h_RI" {
            &mut h_ri
        } else if let Some(k) = tag
            .strip_prefix("h_IT")
            .and_then(|k| k.parse::<usize>().ok())
        {
            if k == 0 || k > l {
                return Err(parse_error(
                    ln,
                    format!("operator index out of range in `{tag}`"),
                ));
            }
            &mut h_it[k - 1]
        } else if let Some(k) = tag.strip_prefix("d_").and_then(|k| k.parse::<usize>().ok()) {
            if k < 2 || k > l {
                return Err(parse_error(
                    ln,
                    format!("target index out of range in `{tag}`"),
                ));
            }
            &mut d[k - 2]
        } else {
            return Err(parse_error(ln, format!("unknown row tag `{tag}`")));
        };
        if slot.is_some() {
            return Err(parse_error(ln, format!("duplicate row `{tag}`")));
        }
        *slot = Some(ComplexVector::from_vec(parse_row(ln, &tokens[1..], n)?));
    }
    let missing = |tag: String| parse_error(hl, format!("missing row `{tag}`"));
    let h_ri = h_ri.ok_or_else(|| missing("h_RI".into()))?;
    let h_it = h_it
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| missing(format!("h_IT{}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    let d = d
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| missing(format!("d_{}", i + 2))))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        ScenarioChannels::new(h_ri, h_it)?,
        TargetReflections::new(d),
    ))
}
