//! Text tables of kernels. A radial table has two columns `t K(t)`; a modal
//! table carries a `# modes:` header naming the angular factor of each
//! further column (`1`, `cos<m>`, `sin<m>` in the plane, `p<a><b><c>` for the
//! monomial `w₁^a w₂^b w₃^c`).

use super::{Kernel, LogTable, Profile, SphereFn};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

pub fn mode_name(f: &SphereFn) -> Result<String> {
    match f {
        SphereFn::Fourier { cos, sin } => {
            let nz: Vec<String> = cos
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(m, _)| if m == 0 { "1".to_string() } else { format!("cos{m}") })
                .chain(sin.iter().enumerate().filter(|(_, s)| **s != 0.0).map(|(m, _)| format!("sin{m}")))
                .collect();
            match nz.as_slice() {
                [one] => Ok(one.clone()),
                _ => Err(Error::BadSpec("table modes must be single unit Fourier terms".into())),
            }
        }
        SphereFn::Poly { terms } => match terms.as_slice() {
            [(c, k)] if *c == 1.0 => Ok(format!("p{}{}{}", k[0], k[1], k[2])),
            _ => Err(Error::BadSpec("table modes must be single unit monomials".into())),
        },
    }
}

pub fn parse_mode(name: &str) -> Result<SphereFn> {
    let unit = |m: usize, is_cos: bool| {
        let mut v = vec![0.0; m + 1];
        v[m] = 1.0;
        if is_cos {
            SphereFn::Fourier { cos: v, sin: vec![] }
        } else {
            SphereFn::Fourier { cos: vec![], sin: v }
        }
    };
    let bad = || Error::BadSpec(format!("unknown table mode '{name}'"));
    if name == "1" {
        return Ok(unit(0, true));
    }
    if let Some(m) = name.strip_prefix("cos") {
        return Ok(unit(m.parse().map_err(|_| bad())?, true));
    }
    if let Some(m) = name.strip_prefix("sin") {
        return Ok(unit(m.parse().map_err(|_| bad())?, false));
    }
    if let Some(p) = name.strip_prefix('p') {
        let e: Vec<u8> = p.chars().map(|c| c.to_digit(10).map(|d| d as u8)).collect::<Option<_>>().ok_or_else(bad)?;
        if e.len() != 3 {
            return Err(bad());
        }
        return Ok(SphereFn::Poly {
            terms: vec![(1.0, [e[0], e[1], e[2]])],
        });
    }
    Err(bad())
}

/// Reads a radial (two-column) or modal table as a kernel on `R^n`.
pub fn read_table(path: &Path, n: usize) -> Result<Kernel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read kernel table {}: {e}", path.display())))?;
    let mut modes: Option<Vec<SphereFn>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(h) = line.strip_prefix('#') {
            if let Some(list) = h.trim().strip_prefix("modes:") {
                modes = Some(list.split_whitespace().map(parse_mode).collect::<Result<_>>()?);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("{}: line {} is not numeric", path.display(), i + 1)))?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, |r| r.len());
    if cols < 2 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{}: ragged or empty table", path.display())));
    }
    let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let column = |j: usize| -> Result<Profile> {
        let y: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        Ok(Profile::Table(Arc::new(LogTable::new(&t, &y)?)))
    };
    match modes {
        None if cols == 2 => Ok(Kernel::radial(n, column(1)?)),
        None => Err(Error::Config(format!("{}: {cols} columns but no '# modes:' header", path.display()))),
        Some(m) if m.len() + 1 == cols => {
            let terms = m.into_iter().enumerate().map(|(j, f)| Ok((column(j + 1)?, f))).collect::<Result<Vec<_>>>()?;
            Ok(Kernel::modal(n, terms))
        }
        Some(m) => Err(Error::Config(format!(
            "{}: header names {} modes for {} data columns",
            path.display(),
            m.len(),
            cols - 1
        ))),
    }
}

/// Writes `f_j(t)` for each `(profile, mode)` term at the radii `t`.
pub fn write_modal_table(path: &Path, terms: &[(Profile, SphereFn)], t: &[f64]) -> Result<()> {
    let names = terms.iter().map(|(_, f)| mode_name(f)).collect::<Result<Vec<_>>>()?;
    let mut s = String::new();
    let _ = writeln!(s, "# modes: {}", names.join(" "));
    for &ti in t {
        let _ = write!(s, "{ti:e}");
        for (p, _) in terms {
            let _ = write!(s, " {:e}", p.value(ti));
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for name in ["1", "cos2", "sin3", "p102"] {
            assert_eq!(mode_name(&parse_mode(name).unwrap()).unwrap(), name);
        }
        assert!(parse_mode("tan1").is_err());
    }

    #[test]
    fn modal_table_round_trip() {
        let dir = std::env::temp_dir().join(format!("regdist-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("k.txt");
        let terms = vec![
            (Profile::parse("1/(1+t^2)").unwrap(), parse_mode("1").unwrap()),
            (Profile::parse("exp(-t)").unwrap(), parse_mode("cos2").unwrap()),
        ];
        let t: Vec<f64> = (0..=256).map(|i| 0.01 * 10f64.powf(i as f64 / 64.0)).collect();
        write_modal_table(&path, &terms, &t).unwrap();
        let k = read_table(&path, 2).unwrap();
        let want = Kernel::modal(2, terms);
        for x in [[0.3, 0.2], [1.0, -2.0], [0.05, 0.0]] {
            assert!((k.value(&x) - want.value(&x)).abs() < 1e-6);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
