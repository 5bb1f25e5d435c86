//! Persistence diagrams and their CSV form (`degree,birth,death`, essential
//! classes written with death `inf`).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramPoint {
    pub degree: usize,
    pub birth: f64,
    pub death: f64,
}

impl DiagramPoint {
    pub fn is_essential(&self) -> bool {
        self.death == f64::INFINITY
    }

    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }
}

/// Multiset of `(birth, death, degree)` points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub points: Vec<DiagramPoint>,
}

impl PersistenceDiagram {
    pub fn new(mut points: Vec<DiagramPoint>) -> Self {
        sort_points(&mut points);
        Self { points }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, degree: usize, birth: f64, death: f64) {
        self.points.push(DiagramPoint { degree, birth, death });
        sort_points(&mut self.points);
    }

    /// `(birth, death)` pairs in one degree.
    pub fn degree(&self, degree: usize) -> Vec<(f64, f64)> {
        self.points.iter().filter(|p| p.degree == degree).map(|p| (p.birth, p.death)).collect()
    }

    pub fn finite(&self, degree: usize) -> Vec<(f64, f64)> {
        self.degree(degree).into_iter().filter(|p| p.1.is_finite()).collect()
    }

    pub fn essential(&self, degree: usize) -> Vec<f64> {
        self.degree(degree).into_iter().filter(|p| p.1.is_infinite()).map(|p| p.0).collect()
    }

    /// One past the highest degree present (0 when empty).
    pub fn degree_bound(&self) -> usize {
        self.points.iter().map(|p| p.degree + 1).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: PersistenceDiagram) {
        self.points.extend(other.points);
        sort_points(&mut self.points);
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["degree", "birth", "death"])?;
        for p in &self.points {
            w.write_record([p.degree.to_string(), fmt_real(p.birth), fmt_real(p.death)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["degree", "birth", "death"] {
            return Err(Error::Format(format!("expected header degree,birth,death, got {headers:?}")));
        }
        let mut points = Vec::new();
        for record in r.records() {
            let record = record?;
            let degree = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad degree {:?}", &record[0])))?;
            let birth = parse_real(&record[1])?;
            let death = parse_real(&record[2])?;
            if death < birth {
                return Err(Error::Format(format!("death {death} before birth {birth}")));
            }
            points.push(DiagramPoint { degree, birth, death });
        }
        Ok(Self::new(points))
    }
}

fn sort_points(points: &mut [DiagramPoint]) {
    points.sort_by(|a, b| {
        a.degree
            .cmp(&b.degree)
            .then(a.birth.total_cmp(&b.birth))
            .then(a.death.total_cmp(&b.death))
    });
}

pub fn fmt_real(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn parse_real(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| Error::Format(format!("bad number {t:?}"))),
    }
}
