//! The `.lpts` and `.cex` text formats.
//!
//! `.lpts` is line oriented, UTF-8, `#` starts a comment:
//!
//! ```text
//! lpts <name>
//! alphabet <a1> <a2> ...
//! states <s1> <s2> ...
//! start <s>
//! trans <s> <a> { <s1>: <p1>, <s2>: <p2>, ... }
//! ```
//!
//! Probabilities are written `n/d` or as the integers `0` and `1`. Repeated
//! `trans` lines express non-determinism, including several transitions on
//! the same action. Serialization is canonical: sections in the order above,
//! transitions sorted lexicographically by (source, action, serialized
//! distribution), rationals in lowest terms.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Distribution, Lpts, ModelError, StateId, Transition};
use crate::rational::{format_rational, parse_rational};
use crate::simulation::{CexTree, ExecutionMapping};

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_lpts(text: &str) -> Result<Lpts, ModelError> {
    let mut name: Option<String> = None;
    let mut alphabet: Option<BTreeSet<String>> = None;
    let mut states: Option<Vec<String>> = None;
    let mut start: Option<String> = None;
    let mut trans_lines: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (keyword, rest) = match line.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (line, ""),
        };
        if name.is_none() && keyword != "lpts" {
            return Err(syntax(lineno, 1, "expected `lpts <name>` header"));
        }
        match keyword {
            "lpts" => {
                if name.is_some() {
                    return Err(syntax(lineno, 1, "duplicate `lpts` header"));
                }
                if rest.is_empty() {
                    return Err(syntax(lineno, 1, "missing model name"));
                }
                name = Some(rest.to_string());
            }
            "alphabet" => {
                if alphabet.is_some() {
                    return Err(syntax(lineno, 1, "duplicate `alphabet` section"));
                }
                alphabet = Some(rest.split_whitespace().map(str::to_string).collect());
            }
            "states" => {
                if states.is_some() {
                    return Err(syntax(lineno, 1, "duplicate `states` section"));
                }
                let names: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
                if names.is_empty() {
                    return Err(syntax(lineno, 1, "empty `states` section"));
                }
                states = Some(names);
            }
            "start" => {
                if start.is_some() {
                    return Err(syntax(lineno, 1, "duplicate `start` section"));
                }
                if rest.is_empty() {
                    return Err(syntax(lineno, 1, "missing start state"));
                }
                start = Some(rest.to_string());
            }
            "trans" => trans_lines.push((lineno, rest.to_string())),
            other => {
                return Err(syntax(lineno, 1, format!("unknown keyword `{other}`")));
            }
        }
    }

    let name = name.ok_or_else(|| syntax(1, 1, "missing `lpts` header"))?;
    let states = states.ok_or_else(|| syntax(1, 1, "missing `states` section"))?;
    let alphabet = alphabet.ok_or_else(|| syntax(1, 1, "missing `alphabet` section"))?;
    let start_name = start.ok_or_else(|| syntax(1, 1, "missing `start` section"))?;

    let index: BTreeMap<&str, StateId> = states
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), StateId(i)))
        .collect();
    let start = *index
        .get(start_name.as_str())
        .ok_or(ModelError::BadStart(start_name))?;

    let mut transitions = Vec::new();
    for (lineno, rest) in trans_lines {
        transitions.push(parse_transition(lineno, &rest, &index, &alphabet)?);
    }
    Lpts::new(name, states, start, alphabet, transitions)
}

fn parse_transition(
    lineno: usize,
    rest: &str,
    index: &BTreeMap<&str, StateId>,
    alphabet: &BTreeSet<String>,
) -> Result<Transition, ModelError> {
    let open = rest
        .find('{')
        .ok_or_else(|| syntax(lineno, 1, "missing `{` in transition"))?;
    let close = rest
        .rfind('}')
        .ok_or_else(|| syntax(lineno, 1, "missing `}` in transition"))?;
    if close < open {
        return Err(syntax(lineno, open + 1, "mismatched braces"));
    }
    let head: Vec<&str> = rest[..open].split_whitespace().collect();
    let [source, action] = head[..] else {
        return Err(syntax(lineno, 1, "expected `trans <state> <action> { ... }`"));
    };
    let source = *index
        .get(source)
        .ok_or_else(|| ModelError::UnknownState(source.to_string()))?;
    if !alphabet.contains(action) {
        return Err(ModelError::UnknownAction(action.to_string()));
    }
    let mut entries = BTreeMap::new();
    for item in rest[open + 1..close].split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (state, prob) = item
            .split_once(':')
            .ok_or_else(|| syntax(lineno, open + 1, "expected `<state>: <prob>`"))?;
        let sid = *index
            .get(state.trim())
            .ok_or_else(|| ModelError::UnknownState(state.trim().to_string()))?;
        let p = parse_rational(prob)
            .ok_or_else(|| syntax(lineno, open + 1, format!("bad probability `{}`", prob.trim())))?;
        if entries.insert(sid, p).is_some() {
            return Err(syntax(
                lineno,
                open + 1,
                format!("state `{}` repeated in distribution", state.trim()),
            ));
        }
    }
    Ok(Transition {
        source,
        action: action.to_string(),
        target: Distribution::new(entries)?,
    })
}

fn serialize_distribution(l: &Lpts, d: &Distribution) -> String {
    let items: Vec<String> = d
        .iter()
        .map(|(s, p)| format!("{}: {}", l.state_name(s), format_rational(p)))
        .collect();
    format!("{{ {} }}", items.join(", "))
}

pub fn serialize_lpts(l: &Lpts) -> String {
    let mut out = String::new();
    out.push_str(&format!("lpts {}\n", l.name()));
    let alphabet: Vec<&str> = l.alphabet().iter().map(String::as_str).collect();
    out.push_str(&format!("alphabet {}\n", alphabet.join(" ")).replace("alphabet \n", "alphabet\n"));
    out.push_str(&format!("states {}\n", l.state_names().join(" ")));
    out.push_str(&format!("start {}\n", l.state_name(l.start())));
    let mut lines: Vec<(String, String, String)> = l
        .transitions()
        .iter()
        .map(|t| {
            (
                l.state_name(t.source).to_string(),
                t.action.clone(),
                serialize_distribution(l, &t.target),
            )
        })
        .collect();
    lines.sort();
    for (s, a, d) in lines {
        out.push_str(&format!("trans {s} {a} {d}\n"));
    }
    out
}

/// A counterexample file: the tree in `.lpts` form followed by a `mapping`
/// section with one `map <tree-state> <model-state>` line per tree state.
pub fn serialize_cex(cex: &CexTree, mapping: &ExecutionMapping, model: &Lpts) -> String {
    let mut out = serialize_lpts(&cex.tree);
    out.push_str("mapping\n");
    for s in cex.tree.state_ids() {
        out.push_str(&format!(
            "map {} {}\n",
            cex.tree.state_name(s),
            model.state_name(mapping.target(s))
        ));
    }
    out
}

pub fn parse_cex(text: &str, model: &Lpts) -> Result<(CexTree, ExecutionMapping), ModelError> {
    let (tree_part, map_part) = match text.find("\nmapping") {
        Some(i) => (&text[..i], &text[i + 1..]),
        None => return Err(syntax(1, 1, "missing `mapping` section")),
    };
    let tree = parse_lpts(tree_part)?;
    let mut map = BTreeMap::new();
    for (idx, raw) in map_part.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() || line == "mapping" {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let ["map", tree_state, model_state] = parts[..] else {
            return Err(syntax(idx + 1, 1, "expected `map <tree-state> <model-state>`"));
        };
        let ts = tree
            .state_by_name(tree_state)
            .ok_or_else(|| ModelError::UnknownState(tree_state.to_string()))?;
        let ms = model
            .state_by_name(model_state)
            .ok_or_else(|| ModelError::UnknownState(model_state.to_string()))?;
        map.insert(ts, ms);
    }
    let cex = CexTree::new(tree)?;
    Ok((cex, ExecutionMapping::new(map)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_model() {
        let l = parse_lpts("lpts t\nstates z0\nstart z0\nalphabet\n").unwrap();
        assert_eq!(l.n_states(), 1);
        assert!(l.transitions().is_empty());
    }

    #[test]
    fn rejects_bad_sum() {
        let text = "lpts t\nalphabet a\nstates z0 z1 z2\nstart z0\n\
                    trans z0 a { z1: 1/2, z2: 1/3 }\n";
        let err = parse_lpts(text).unwrap_err();
        assert!(matches!(err, ModelError::BadDistributionSum { .. }));
    }

    #[test]
    fn lowest_terms_on_output() {
        let text = "lpts t\nalphabet a\nstates z0 z1 z2\nstart z0\n\
                    trans z0 a { z1: 2/4, z2: 2/4 }\n";
        let l = parse_lpts(text).unwrap();
        assert!(serialize_lpts(&l).contains("z1: 1/2"));
    }

    #[test]
    fn parse_serialize_identity() {
        let text = "lpts m\nalphabet a b\nstates z0 z1 z2\nstart z0\n\
                    trans z1 b { z2: 1 }\ntrans z0 a { z1: 1/2, z2: 1/2 }\n\
                    trans z0 a { z1: 1 }\n";
        let l = parse_lpts(text).unwrap();
        let round = parse_lpts(&serialize_lpts(&l)).unwrap();
        assert_eq!(l, round);
        // serialization is canonical
        assert_eq!(serialize_lpts(&l), serialize_lpts(&round));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header comment\nlpts t # trailing\n\nstates z0\nstart z0\nalphabet\n";
        assert!(parse_lpts(text).is_ok());
    }

    #[test]
    fn unknown_state_reference() {
        let text = "lpts t\nalphabet a\nstates z0\nstart z0\ntrans z0 a { z9: 1 }\n";
        assert!(matches!(
            parse_lpts(text).unwrap_err(),
            ModelError::UnknownState(_)
        ));
    }
}
