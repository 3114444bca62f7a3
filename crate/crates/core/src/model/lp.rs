//! CPLEX-LP text export.

use std::collections::HashSet;

use super::{MilpModel, Sense, VarKind};
use crate::error::{Error, Result};

const WRAP: usize = 100;
const KEYWORDS: [&str; 12] = [
    "st", "s.t.", "subject", "to", "bounds", "bound", "binary", "binaries", "general", "generals", "free", "end",
];

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect();
    let bytes = s.as_bytes();
    let exp_like = matches!(bytes.first(), Some(b'e' | b'E'))
        && matches!(bytes.get(1), Some(b'0'..=b'9' | b'e' | b'E'));
    if s.is_empty() || bytes[0].is_ascii_digit() || bytes[0] == b'.' || exp_like || KEYWORDS.contains(&s.to_ascii_lowercase().as_str()) {
        s.insert(0, '_');
    }
    s.truncate(255);
    s
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for n in names {
        let s = sanitize(n);
        if !seen.insert(s.clone()) {
            return Err(Error::NameCollision(s));
        }
        out.push(s);
    }
    Ok(out)
}

/// LP names of the model's variables, in declaration order.
pub(crate) fn lp_names(model: &MilpModel) -> Result<Vec<String>> {
    unique_names(model.vars.iter().map(|v| v.name.as_str()))
}

/// Appends tokens to `out`, breaking lines before `WRAP` columns.
struct Line<'a> {
    out: &'a mut String,
    col: usize,
}

impl Line<'_> {
    fn push(&mut self, tok: &str) {
        if self.col + 1 + tok.len() > WRAP && self.col > 4 {
            self.out.push_str("\n   ");
            self.col = 3;
        }
        self.out.push(' ');
        self.out.push_str(tok);
        self.col += 1 + tok.len();
    }

    fn end(self) {
        self.out.push('\n');
    }
}

fn write_terms(line: &mut Line, terms: &[(usize, f64)], names: &[String]) {
    for (k, &(j, a)) in terms.iter().enumerate() {
        let sign = if a < 0.0 { "-" } else { "+" };
        let mag = a.abs();
        let body = if mag == 1.0 {
            names[j].clone()
        } else {
            format!("{mag} {}", names[j])
        };
        if k == 0 {
            if a < 0.0 {
                line.push(&format!("-{body}"));
            } else {
                line.push(&body);
            }
        } else {
            line.push(&format!("{sign} {body}"));
        }
    }
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

pub fn export_lp(model: &MilpModel) -> Result<String> {
    let vnames = unique_names(model.vars.iter().map(|v| v.name.as_str()))?;
    let cnames = unique_names(model.constraints.iter().map(|c| c.name.as_str()))?;
    let mut out = String::from("Minimize\n");
    {
        let mut line = Line { out: &mut out, col: 0 };
        line.push("obj:");
        write_terms(&mut line, &model.objective, &vnames);
        let c = model.objective_constant;
        if c != 0.0 || model.objective.is_empty() {
            let tok = if model.objective.is_empty() {
                num(c)
            } else if c < 0.0 {
                format!("- {}", num(-c))
            } else {
                format!("+ {}", num(c))
            };
            line.push(&tok);
        }
        line.end();
    }
    out.push_str("Subject To\n");
    for (c, name) in model.constraints.iter().zip(&cnames) {
        let mut line = Line { out: &mut out, col: 0 };
        line.push(&format!("{name}:"));
        if c.terms.is_empty() {
            match vnames.first() {
                Some(v) => line.push(&format!("0 {v}")),
                None => line.push("0"),
            }
        } else {
            write_terms(&mut line, &c.terms, &vnames);
        }
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        line.push(&format!("{op} {}", num(c.rhs)));
        line.end();
    }
    let mut bounds = Vec::new();
    for (v, name) in model.vars.iter().zip(&vnames) {
        let default = match v.kind {
            VarKind::Binary => v.lb == 0.0 && v.ub == 1.0,
            VarKind::Continuous => v.lb == 0.0 && v.ub == f64::INFINITY,
        };
        if default {
            continue;
        }
        let b = if v.lb == v.ub {
            format!(" {name} = {}", num(v.lb))
        } else if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            format!(" {name} free")
        } else if v.ub == f64::INFINITY {
            format!(" {name} >= {}", num(v.lb))
        } else {
            format!(" {} <= {name} <= {}", num(v.lb), num(v.ub))
        };
        bounds.push(b);
    }
    if !bounds.is_empty() {
        out.push_str("Bounds\n");
        for b in bounds {
            out.push_str(&b);
            out.push('\n');
        }
    }
    let binaries: Vec<&String> = model
        .vars
        .iter()
        .zip(&vnames)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        let mut line = Line { out: &mut out, col: 0 };
        for n in binaries {
            line.push(n);
        }
        line.end();
    }
    out.push_str("End\n");
    Ok(out)
}
