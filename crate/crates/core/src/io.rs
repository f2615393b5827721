//! The plain-text edge-list format.
//!
//! One edge per line, `source target [multiplicity]`, whitespace separated.
//! Lines whose first non-blank character is `#` and blank lines are ignored.
//! Repeated `(source, target)` pairs accumulate.

use crate::error::{KmsError, Result};
use crate::graph::Graph;

pub fn parse_graph(input: &str) -> Result<Graph> {
    let mut edges: Vec<(String, String, u64)> = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let multiplicity = match tokens.len() {
            2 => 1,
            3 => parse_multiplicity(tokens[2], line)?,
            n => {
                return Err(KmsError::Parse {
                    line,
                    message: format!("expected `source target [multiplicity]`, found {n} fields"),
                })
            }
        };
        edges.push((tokens[0].to_owned(), tokens[1].to_owned(), multiplicity));
    }
    if edges.is_empty() {
        return Err(KmsError::EmptyGraph);
    }
    Graph::from_edges(edges, &[])
}

fn parse_multiplicity(token: &str, line: usize) -> Result<u64> {
    let m: u64 = token.parse().map_err(|_| KmsError::Parse {
        line,
        message: format!("multiplicity `{token}` is not a nonnegative integer"),
    })?;
    if m < 1 {
        return Err(KmsError::Parse {
            line,
            message: "multiplicity must be at least 1".into(),
        });
    }
    Ok(m)
}

pub fn serialize_graph(g: &Graph) -> String {
    g.to_edge_list()
}
