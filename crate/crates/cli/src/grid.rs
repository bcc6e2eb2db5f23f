//! Numeric list arguments such as `0,0.1,...,1`.

use rnng::{Error, Result};

/// Rounds away binary noise from accumulated grid steps.
pub fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Parses a comma-separated list. `a,b,...,c` expands to a, a+(b-a), ... up to c.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let tokens: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidParameter(format!("not a number in grid: {t:?}")))
    };
    let mut out: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "..." {
            if out.len() < 2 || i + 1 >= tokens.len() {
                return Err(Error::InvalidParameter("`...` needs two values before it and one after".into()));
            }
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            let end = num(tokens[i + 1])?;
            let step = b - a;
            if step == 0.0 || (end - b) * step < 0.0 {
                return Err(Error::InvalidParameter(format!("grid step {step} does not reach {end}")));
            }
            let count = ((end - a) / step + 1e-9).floor() as usize;
            let already = out.len();
            for j in 2..=count {
                out.push(tidy(a + j as f64 * step));
            }
            if out.len() == already || (out[out.len() - 1] - end).abs() > 1e-9 {
                out.push(end);
            }
            i += 2;
        } else {
            out.push(num(tokens[i])?);
            i += 1;
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_list() {
        assert_eq!(parse_grid("0, 0.5,2").unwrap(), vec![0.0, 0.5, 2.0]);
    }

    #[test]
    fn ellipsis_expands() {
        let g = parse_grid("0,0.1,...,1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
        assert_eq!(parse_grid("1,2,...,4,10").unwrap(), vec![1.0, 2.0, 3.0, 4.0, 10.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(parse_grid("").is_err());
        assert!(parse_grid("0,...,1").is_err());
        assert!(parse_grid("1,0,...,2").is_err());
        assert!(parse_grid("a").is_err());
    }
}
