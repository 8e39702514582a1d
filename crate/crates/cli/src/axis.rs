//! Sweep axis specifications: `name=lin:lo:hi:n`, `name=log:lo:hi:n` or
//! `name=v1,v2,...`.

use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, spec) = s
            .split_once('=')
            .ok_or_else(|| format!("axis '{s}' is not of the form name=spec"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err("axis name is empty".into());
        }
        let spec = spec.trim();
        let values = if let Some(rest) = spec.strip_prefix("lin:") {
            let (lo, hi, n) = range(rest)?;
            match n {
                0 => vec![],
                1 => vec![lo],
                _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            }
        } else if let Some(rest) = spec.strip_prefix("log:") {
            let (lo, hi, n) = range(rest)?;
            if !(lo > 0.0 && hi > 0.0) {
                return Err("log axis bounds must be positive".into());
            }
            let (a, b) = (lo.ln(), hi.ln());
            match n {
                0 => vec![],
                1 => vec![lo],
                _ => (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect(),
            }
        } else if spec.is_empty() {
            vec![]
        } else {
            spec.split(',')
                .map(|v| number(v.trim()))
                .collect::<Result<Vec<_>, _>>()?
        };
        if values.is_empty() {
            return Err("empty grid".into());
        }
        Ok(Axis {
            name: name.to_string(),
            values,
        })
    }
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

fn range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range '{s}' must be lo:hi:n"));
    }
    let n = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("'{}' is not a point count", parts[2]))?;
    Ok((number(parts[0].trim())?, number(parts[1].trim())?, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        let a: Axis = "Gamma=1,0.5".parse().unwrap();
        assert_eq!(a.name, "Gamma");
        assert_eq!(a.values, vec![1.0, 0.5]);
        let l: Axis = "tau=lin:0:2:5".parse().unwrap();
        assert_eq!(l.values, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let g: Axis = "Gamma=log:0.01:100:5".parse().unwrap();
        assert!((g.values[2] - 1.0).abs() < 1e-12);
        assert!((g.values[4] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert_eq!("Gamma=".parse::<Axis>().unwrap_err(), "empty grid");
        assert_eq!("Gamma=lin:0:1:0".parse::<Axis>().unwrap_err(), "empty grid");
        assert!("Gamma".parse::<Axis>().is_err());
        assert!("Gamma=log:0:1:3".parse::<Axis>().is_err());
        assert!("Gamma=1,x".parse::<Axis>().is_err());
        assert!("=1".parse::<Axis>().is_err());
    }
}
