//! File emission: CSV tables and JSON documents with 17 significant digits.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use kinfluid::macro_evolution::MomentTrajectory;
use kinfluid::spectral::SpectralBranch;
use kinfluid::Complex64;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// A float with 17 significant digits; round-trips every `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON whose floats carry 17 significant digits.
struct SignificantFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SignificantFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(io::Error::other)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(io::Error::other)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    fs::write(path, to_json(value)?)
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = Vec<String>>) -> io::Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}

pub const BRANCH_HEADER: &str =
    "label,eta,re_mu,im_mu,defect,residual,C_0re,C_0im,C_1re,C_1im,C_2re,C_2im,C_3re,C_3im,C_4re,C_4im";

pub fn write_branch_csv(path: &Path, branch: &SpectralBranch) -> io::Result<()> {
    let rows = branch.samples.iter().map(|s| {
        let mut row = vec![
            branch.label.as_str().to_string(),
            float(s.eta),
            float(s.mu.re),
            float(s.mu.im),
            float(s.defect),
            float(s.residual),
        ];
        for c in &s.coefficients {
            row.push(float(c.re));
            row.push(float(c.im));
        }
        row
    });
    write_rows(path, BRANCH_HEADER, rows)
}

pub const TRAJECTORY_HEADER: &str = "t,rho_re,rho_im,m1_re,m1_im,m2_re,m2_im,m3_re,m3_im,theta_re,theta_im,energy";

/// At most `rows` evenly spaced samples of the trajectory.
pub fn write_trajectory_csv(path: &Path, tr: &MomentTrajectory, rows: usize) -> io::Result<()> {
    let complex = |z: Complex64| [float(z.re), float(z.im)];
    let rows = tr.subsample_indices(rows).into_iter().map(|i| {
        let mut row = vec![float(tr.times[i])];
        row.extend(complex(tr.rho[i]));
        for m in tr.momentum[i] {
            row.extend(complex(m));
        }
        row.extend(complex(tr.theta[i]));
        row.push(float(tr.energy[i]));
        row
    });
    write_rows(path, TRAJECTORY_HEADER, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 1.0] {
            let s = float(x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_floats_use_the_same_format() {
        #[derive(Serialize)]
        struct Doc {
            x: f64,
            n: u32,
            missing: f64,
        }
        let text = to_json(&Doc { x: 0.1, n: 3, missing: f64::NAN }).unwrap();
        assert!(text.contains("\"x\": 1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"n\": 3"));
        assert!(text.contains("\"missing\": null"));
        assert!(text.ends_with("}\n") && !text.contains('\r'));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }
}
