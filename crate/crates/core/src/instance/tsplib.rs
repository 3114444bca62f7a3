//! TSPLIB-style CVRP reader (EUC_2D coordinates).

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A CVRP benchmark as read from disk. Index `i` refers to the i-th declared node.
#[derive(Clone, Debug, PartialEq)]
pub struct CvrpInstance {
    pub name: String,
    /// Original node labels from the file.
    pub labels: Vec<usize>,
    pub coords: Vec<(f64, f64)>,
    pub demands: Vec<f64>,
    pub depot: usize,
    pub capacity: f64,
}

impl CvrpInstance {
    pub fn num_customers(&self) -> usize {
        self.coords.len() - 1
    }

    /// Customer indices (every node but the depot), in file order.
    pub fn customers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.coords.len()).filter(move |&i| i != self.depot)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Coords,
    Demands,
    Depots,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| perr(line, format!("cannot parse number {tok:?}")))
}

pub fn parse_cvrp(text: &str) -> Result<CvrpInstance> {
    let mut name = None;
    let mut dimension: Option<usize> = None;
    let mut capacity: Option<f64> = None;
    let mut coords: Vec<(usize, f64, f64, usize)> = Vec::new();
    let mut demands: Vec<(usize, f64, usize)> = Vec::new();
    let mut depots: Vec<usize> = Vec::new();
    let mut seen = [false; 3];
    let mut section = Section::None;
    let mut section_start = 0;
    let mut last_line = 0;

    let close = |section: Section, start: usize, end: usize, coords: &Vec<(usize, f64, f64, usize)>, demands: &Vec<(usize, f64, usize)>, dim: Option<usize>| -> Result<()> {
        let count = match section {
            Section::Coords => coords.len(),
            Section::Demands => demands.len(),
            _ => return Ok(()),
        };
        let dim = dim.ok_or_else(|| perr(start, "section appears before DIMENSION"))?;
        if count != dim {
            return Err(perr(end, format!("section has {count} entries, DIMENSION is {dim}")));
        }
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let starts_alpha = line.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        if section != Section::None && !starts_alpha {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match section {
                Section::Coords => {
                    if toks.len() != 3 {
                        return Err(perr(line_no, "expected `id x y`"));
                    }
                    coords.push((num(toks[0], line_no)?, num(toks[1], line_no)?, num(toks[2], line_no)?, line_no));
                }
                Section::Demands => {
                    if toks.len() != 2 {
                        return Err(perr(line_no, "expected `id demand`"));
                    }
                    demands.push((num(toks[0], line_no)?, num(toks[1], line_no)?, line_no));
                }
                Section::Depots => {
                    for t in toks {
                        let v: i64 = num(t, line_no)?;
                        if v == -1 {
                            section = Section::None;
                            break;
                        }
                        if v <= 0 {
                            return Err(perr(line_no, "depot id must be positive"));
                        }
                        depots.push(v as usize);
                    }
                }
                Section::None => unreachable!(),
            }
            continue;
        }
        if section != Section::None {
            close(section, section_start, line_no, &coords, &demands, dimension)?;
            section = Section::None;
        }
        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim(), Some(v.trim())),
            None => (line.split_whitespace().next().unwrap_or(""), None),
        };
        match key {
            "NAME" => name = value.map(str::to_string),
            "DIMENSION" => {
                dimension = Some(num(value.ok_or_else(|| perr(line_no, "DIMENSION needs a value"))?, line_no)?)
            }
            "CAPACITY" => {
                capacity = Some(num(value.ok_or_else(|| perr(line_no, "CAPACITY needs a value"))?, line_no)?)
            }
            "EDGE_WEIGHT_TYPE" => {
                if value != Some("EUC_2D") {
                    return Err(perr(line_no, "only EUC_2D is supported"));
                }
            }
            "NODE_COORD_SECTION" => {
                section = Section::Coords;
                seen[0] = true;
                section_start = line_no;
            }
            "DEMAND_SECTION" => {
                section = Section::Demands;
                seen[1] = true;
                section_start = line_no;
            }
            "DEPOT_SECTION" => {
                section = Section::Depots;
                seen[2] = true;
                section_start = line_no;
            }
            "EOF" => break,
            _ => {}
        }
    }
    if section != Section::None {
        close(section, section_start, last_line + 1, &coords, &demands, dimension)?;
    }

    let name = name.ok_or_else(|| Error::MissingSection("NAME".into()))?;
    let dimension = dimension.ok_or_else(|| Error::MissingSection("DIMENSION".into()))?;
    let capacity = capacity.ok_or_else(|| Error::MissingSection("CAPACITY".into()))?;
    for (flag, label) in seen.iter().zip(["NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"]) {
        if !flag {
            return Err(Error::MissingSection(label.into()));
        }
    }
    if !(capacity > 0.0) {
        return Err(perr(0, "CAPACITY must be positive"));
    }
    if depots.len() != 1 {
        return Err(perr(last_line, format!("expected exactly one depot, found {}", depots.len())));
    }

    let mut index = HashMap::new();
    let mut labels = Vec::with_capacity(dimension);
    let mut xy = Vec::with_capacity(dimension);
    for &(id, x, y, line) in &coords {
        if index.insert(id, labels.len()).is_some() {
            return Err(perr(line, format!("duplicate node id {id}")));
        }
        labels.push(id);
        xy.push((x, y));
    }
    let mut dem = vec![f64::NAN; dimension];
    for &(id, d, line) in &demands {
        let i = *index
            .get(&id)
            .ok_or_else(|| perr(line, format!("demand for unknown node {id}")))?;
        if !dem[i].is_nan() {
            return Err(perr(line, format!("duplicate demand for node {id}")));
        }
        if d < 0.0 {
            return Err(perr(line, "negative demand"));
        }
        dem[i] = d;
    }
    let depot = *index
        .get(&depots[0])
        .ok_or_else(|| perr(last_line, format!("unknown depot id {}", depots[0])))?;
    for (i, d) in dem.iter_mut().enumerate() {
        if i == depot {
            *d = 0.0;
        } else if !(*d > 0.0) {
            return Err(perr(0, format!("customer {} needs a positive demand", labels[i])));
        }
    }
    Ok(CvrpInstance {
        name,
        labels,
        coords: xy,
        demands: dem,
        depot,
        capacity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "NAME : tiny\nTYPE : CVRP\nDIMENSION : 2\nEDGE_WEIGHT_TYPE : EUC_2D\nCAPACITY : 10\nNODE_COORD_SECTION\n1 0 0\n2 3 4\nDEMAND_SECTION\n1 0\n2 5\nDEPOT_SECTION\n1\n-1\nEOF\n";

    #[test]
    fn minimal_file() {
        let c = parse_cvrp(TWO).unwrap();
        assert_eq!(c.name, "tiny");
        assert_eq!(c.num_customers(), 1);
        assert_eq!(c.coords[1], (3.0, 4.0));
        assert_eq!(c.demands, vec![0.0, 5.0]);
        assert_eq!(c.depot, 0);
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        let text = "NAME : bad\nDIMENSION : 5\nCAPACITY : 10\nNODE_COORD_SECTION\n1 0 0\n2 1 1\n3 2 2\n4 3 3\nDEMAND_SECTION\n1 0\n";
        match parse_cvrp(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_sections() {
        let text = "NAME : x\nDIMENSION : 2\nCAPACITY : 10\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nDEPOT_SECTION\n1\n-1\n";
        assert!(matches!(parse_cvrp(text), Err(Error::MissingSection(s)) if s == "DEMAND_SECTION"));
        let text = TWO.replace("CAPACITY : 10\n", "");
        assert!(matches!(parse_cvrp(&text), Err(Error::MissingSection(s)) if s == "CAPACITY"));
    }

    #[test]
    fn malformed_number() {
        let text = TWO.replace("2 3 4", "2 3 four");
        assert!(matches!(parse_cvrp(&text), Err(Error::Parse { line: 8, .. })));
    }
}
