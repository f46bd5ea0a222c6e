//! Text formats: `%.17g` float rendering, CSV matrices and vectors, and flat
//! `key = value` files used for instance metadata and run configs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::problem::{InstanceMeta, ProblemInstance};

/// Renders `x` exactly as C's `printf("%.17g", x)` does.
pub fn fmt_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= P {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("not a number: {tok:?}")))
}

/// One row per matrix row, comma-separated.
pub fn write_matrix_csv(path: &Path, u: &DenseMatrix) -> Result<()> {
    let mut out = String::with_capacity(u.rows() * u.cols() * 24);
    for i in 0..u.rows() {
        for (j, v) in u.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_g17(*v));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = read(path)?;
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| parse_f64(path, k + 1, t))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "empty matrix file"));
    }
    DenseMatrix::from_rows(&rows).map_err(|e| Error::parse(path, 0, e.to_string()))
}

/// One value per line.
pub fn write_vector_csv(path: &Path, v: &DenseVector) -> Result<()> {
    let mut out = String::with_capacity(v.len() * 24);
    for x in v.iter() {
        out.push_str(&fmt_g17(*x));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_vector_csv(path: &Path) -> Result<DenseVector> {
    let text = read(path)?;
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        values.push(parse_f64(path, k + 1, line)?);
    }
    DenseVector::new(values).map_err(|e| Error::parse(path, 0, e.to_string()))
}

/// Ordered `key = value` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Later entries overwrite earlier ones.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in other.iter() {
            self.set(k, v);
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, k + 1, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(path, k + 1, "empty key"));
            }
            kv.set(key, value.trim());
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(path, &read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

pub const META_FILE: &str = "meta.txt";

/// Writes `U.csv`, `x_star.csv`, `e.csv`, `y.csv` and `meta.txt` into `dir`.
pub fn write_instance(dir: &Path, inst: &ProblemInstance) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix_csv(&dir.join("U.csv"), &inst.u)?;
    write_vector_csv(&dir.join("x_star.csv"), &inst.x_star)?;
    write_vector_csv(&dir.join("e.csv"), &inst.e)?;
    write_vector_csv(&dir.join("y.csv"), &inst.y)?;
    let mut meta = KeyValues::new();
    meta.set("n", inst.n())
        .set("d", inst.d())
        .set("matrix", &inst.meta.matrix)
        .set("kind", &inst.meta.signal)
        .set("normalize", inst.meta.normalize)
        .set("s_true", inst.s_true)
        .set("sigma", fmt_g17(inst.meta.sigma))
        .set("seed", inst.meta.seed);
    meta.write(&dir.join(META_FILE))
}

/// Reads an instance directory written by [`write_instance`].
pub fn read_instance(dir: &Path) -> Result<ProblemInstance> {
    let meta_path = dir.join(META_FILE);
    let kv = KeyValues::read(&meta_path)?;
    let get = |k: &str| {
        kv.get(k)
            .ok_or_else(|| Error::parse(&meta_path, 0, format!("missing key {k:?}")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::parse(&meta_path, 0, format!("bad value for {k:?}")))
    };
    let u = read_matrix_csv(&dir.join("U.csv"))?;
    let x_star = read_vector_csv(&dir.join("x_star.csv"))?;
    let e = read_vector_csv(&dir.join("e.csv"))?;
    let y = read_vector_csv(&dir.join("y.csv"))?;
    if x_star.len() != u.cols() || e.len() != u.rows() || y.len() != u.rows() {
        return Err(Error::parse(
            dir,
            0,
            "instance files disagree on dimensions",
        ));
    }
    Ok(ProblemInstance {
        u,
        x_star,
        e,
        y,
        s_true: num("s_true")? as usize,
        meta: InstanceMeta {
            matrix: get("matrix")?.to_string(),
            signal: get("kind")?.to_string(),
            normalize: get("normalize")? == "true",
            sigma: num("sigma")?,
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::parse(&meta_path, 0, "bad seed"))?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{InstanceSpec, MatrixKind, SignalKind};
    use proptest::prelude::*;

    #[test]
    fn g17_matches_printf() {
        // reference strings from C printf("%.17g")
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (100.0, "100"),
            (1e-5, "1.0000000000000001e-05"),
            (0.0001, "0.0001"),
            (1e17, "1e+17"),
            (1.2345e16, "12345000000000000"),
            (123456789.125, "123456789.125"),
            (1.0 / 3.0, "0.33333333333333331"),
            (f64::MIN_POSITIVE, "2.2250738585072014e-308"),
            (6.02214076e23, "6.0221407599999999e+23"),
            (0.0, "0"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g17(x), s, "{x:e}");
        }
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn key_values_parse() {
        let text = "# comment\n a = 1 \n\nb=two # trailing\n";
        let kv = KeyValues::parse(Path::new("x"), text).unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("two"));
        assert!(KeyValues::parse(Path::new("x"), "novalue\n").is_err());
        let again = KeyValues::parse(Path::new("x"), &kv.render()).unwrap();
        assert_eq!(again, kv);
    }

    #[test]
    fn instance_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inst = InstanceSpec {
            n: 5,
            d: 8,
            matrix: MatrixKind::Gaussian,
            signal: SignalKind::ExactSparse { s: 2 }.into(),
            sigma: 0.01,
        }
        .generate(77)
        .unwrap();
        write_instance(dir.path(), &inst).unwrap();
        let back = read_instance(dir.path()).unwrap();
        assert_eq!(back.u, inst.u);
        assert_eq!(back.x_star, inst.x_star);
        assert_eq!(back.e, inst.e);
        assert_eq!(back.y, inst.y);
        assert_eq!(back.meta, inst.meta);
        assert_eq!(back.s_true, 2);
        let meta = fs::read_to_string(dir.path().join(META_FILE)).unwrap();
        assert!(meta.contains("seed = 77"));
        assert!(meta.contains("kind = exact-sparse:2"));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_instance(dir.path()),
            Err(Error::Io { .. })
        ));
    }
}
