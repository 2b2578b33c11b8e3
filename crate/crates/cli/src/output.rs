use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use celtic_stone::analysis::{ManifoldPolyline, ScanRecord};
use celtic_stone::physics::{integrals, BodyState, StoneParams};
use celtic_stone::poincare::SectionPoint;

pub type IoResult<T> = std::io::Result<T>;

/// CSV file whose first lines are `# key: value` metadata comments.
pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
    pub path: PathBuf,
}

impl CsvOut {
    pub fn create(
        dir: &Path,
        name: &str,
        meta: &[(&str, String)],
        header: &[&str],
    ) -> IoResult<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut file = BufWriter::new(File::create(&path)?);
        for (k, v) in meta {
            writeln!(file, "# {k}: {v}")?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { writer, path })
    }

    pub fn row<I, S>(&mut self, fields: I) -> IoResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        Ok(self.writer.write_record(fields)?)
    }

    pub fn finish(mut self) -> IoResult<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn write_trajectory(
    dir: &Path,
    meta: &[(&str, String)],
    samples: &[(f64, BodyState)],
    params: &StoneParams,
) -> IoResult<PathBuf> {
    let header = [
        "t",
        "M1",
        "M2",
        "M3",
        "gamma1",
        "gamma2",
        "gamma3",
        "energy",
        "gamma_norm_sq",
    ];
    let mut out = CsvOut::create(dir, "trajectory.csv", meta, &header)?;
    for (t, s) in samples {
        let (e, g) = match integrals(s, params) {
            Ok(i) => (num(i.energy), num(i.gamma_norm_sq)),
            Err(_) => ("nan".into(), num(s.gamma.norm_squared())),
        };
        let mut row = vec![num(*t)];
        row.extend(s.to_array().iter().map(|v| num(*v)));
        row.push(e);
        row.push(g);
        out.row(row)?;
    }
    out.finish()
}

pub fn write_section_points(
    dir: &Path,
    name: &str,
    meta: &[(&str, String)],
    points: &[SectionPoint],
) -> IoResult<PathBuf> {
    let mut out = CsvOut::create(dir, name, meta, &["index", "l", "eta", "xi"])?;
    for (i, p) in points.iter().enumerate() {
        out.row([i.to_string(), num(p.l), num(p.eta), num(p.xi)])?;
    }
    out.finish()
}

pub fn write_manifold(
    dir: &Path,
    meta: &[(&str, String)],
    lines: &[ManifoldPolyline],
) -> IoResult<PathBuf> {
    let mut out = CsvOut::create(
        dir,
        "manifold.csv",
        meta,
        &["branch", "index", "l", "eta", "xi"],
    )?;
    for line in lines {
        for (i, p) in line.points.iter().enumerate() {
            out.row([
                line.branch.as_str().to_string(),
                i.to_string(),
                num(p.l),
                num(p.eta),
                num(p.xi),
            ])?;
        }
    }
    out.finish()
}

pub fn write_scan(
    dir: &Path,
    meta: &[(&str, String)],
    records: &[ScanRecord],
) -> IoResult<PathBuf> {
    let header = [
        "E", "Lambda1", "Lambda2", "Lambda3", "fp_l", "fp_eta", "fp_xi", "mu1_re", "mu1_im",
        "mu2_re", "mu2_im", "mu3_re", "mu3_im", "regime", "error",
    ];
    let mut out = CsvOut::create(dir, "scan.csv", meta, &header)?;
    let blank = || String::new();
    for r in records {
        let mut row = vec![num(r.energy)];
        match &r.spectrum {
            Some(s) => row.extend(s.as_array().iter().map(|v| num(*v))),
            None => row.extend((0..3).map(|_| blank())),
        }
        match &r.fixed_point {
            Some(fp) => {
                row.extend([fp.point.l, fp.point.eta, fp.point.xi].map(num));
                for m in fp.multipliers {
                    row.push(num(m.re));
                    row.push(num(m.im));
                }
            }
            None => row.extend((0..9).map(|_| blank())),
        }
        row.push(r.regime.map(|c| c.to_string()).unwrap_or_default());
        row.push(r.error.clone().unwrap_or_default());
        out.row(row)?;
    }
    out.finish()
}

pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> IoResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}
