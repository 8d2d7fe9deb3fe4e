//! Line-oriented circuit text format.
//!
//! ```text
//! # comment
//! qubits 2
//! accept 1
//! gate h 0
//! gate hk -3 1
//! gate rz 0.5 0
//! snapshot s
//! measure 0 -> m0
//! rewind s if m0 == 1
//! measure 0 -> m1 if m0 == 1
//! postselect 1 = 0
//! ```
//!
//! Header keywords (`qubits`, `name`, `rewinds`, `description-bits`,
//! `accept`) may appear anywhere after `qubits`. Any instruction line may end
//! with `if <label> == <bit> [&& ...]`.

use std::fmt::Write as _;

use super::{Circuit, Condition, GateKind, Instruction};
use crate::error::{Error, Result};

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| err(line, format!("expected {what}, found `{tok}`")))
}

fn parse_bit(tok: Option<&str>, line: usize) -> Result<u8> {
    match tok {
        Some("0") => Ok(0),
        Some("1") => Ok(1),
        Some(other) => Err(err(line, format!("expected 0 or 1, found `{other}`"))),
        None => Err(err(line, "missing bit")),
    }
}

fn parse_label(tok: Option<&str>, line: usize) -> Result<String> {
    let tok = tok.ok_or_else(|| err(line, "missing label"))?;
    let valid = !tok.is_empty()
        && tok
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if valid {
        Ok(tok.to_string())
    } else {
        Err(err(line, format!("invalid label `{tok}`")))
    }
}

fn expect(tok: Option<&str>, want: &str, line: usize) -> Result<()> {
    match tok {
        Some(t) if t == want => Ok(()),
        Some(t) => Err(err(line, format!("expected `{want}`, found `{t}`"))),
        None => Err(err(line, format!("expected `{want}`"))),
    }
}

fn no_trailing<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<()> {
    match toks.next() {
        Some(t) => Err(err(line, format!("unexpected token `{t}`"))),
        None => Ok(()),
    }
}

fn parse_condition(toks: &[&str], line: usize) -> Result<Condition> {
    let mut clauses = Vec::new();
    for (i, clause) in toks.split(|t| *t == "&&").enumerate() {
        if clause.len() != 3 || clause[1] != "==" {
            return Err(err(
                line,
                format!("condition clause {} must read `<label> == <bit>`", i + 1),
            ));
        }
        clauses.push((
            parse_label(Some(clause[0]), line)?,
            parse_bit(Some(clause[2]), line)?,
        ));
    }
    Ok(Condition { clauses })
}

fn parse_gate<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<Instruction> {
    let name = toks.next().ok_or_else(|| err(line, "missing gate name"))?;
    let kind = match name {
        "x" => GateKind::X,
        "h" => GateKind::H,
        "s" => GateKind::S,
        "cz" => GateKind::Cz,
        "ch" => GateKind::Ch,
        "ccz" => GateKind::Ccz,
        "swap" => GateKind::Swap,
        "hk" => {
            let tok = toks
                .next()
                .ok_or_else(|| err(line, "hk needs an exponent"))?;
            let k = tok
                .parse()
                .map_err(|_| err(line, format!("invalid hk exponent `{tok}`")))?;
            GateKind::Hk(k)
        }
        "rz" => {
            let tok = toks.next().ok_or_else(|| err(line, "rz needs an angle"))?;
            let theta: f64 = tok
                .parse()
                .map_err(|_| err(line, format!("invalid rz angle `{tok}`")))?;
            GateKind::Rz(theta)
        }
        other => return Err(err(line, format!("unknown gate `{other}`"))),
    };
    let targets = toks
        .map(|t| parse_usize(Some(t), line, "qubit index"))
        .collect::<Result<Vec<_>>>()?;
    if targets.is_empty() {
        return Err(err(line, format!("gate {} has no targets", kind.name())));
    }
    Ok(Instruction::Gate { kind, targets })
}

fn parse_instruction(keyword: &str, rest: &[&str], line: usize) -> Result<Instruction> {
    let mut toks = rest.iter().copied();
    let instr = match keyword {
        "gate" => return parse_gate(toks, line),
        "measure" => {
            let qubit = parse_usize(toks.next(), line, "qubit index")?;
            expect(toks.next(), "->", line)?;
            let label = parse_label(toks.next(), line)?;
            Instruction::Measure { qubit, label }
        }
        "postselect" => {
            let qubit = parse_usize(toks.next(), line, "qubit index")?;
            expect(toks.next(), "=", line)?;
            let bit = parse_bit(toks.next(), line)?;
            Instruction::Postselect { qubit, bit }
        }
        "snapshot" => Instruction::Snapshot {
            label: parse_label(toks.next(), line)?,
        },
        "rewind" => Instruction::Rewind {
            label: parse_label(toks.next(), line)?,
        },
        "clone" => Instruction::Clone {
            label: parse_label(toks.next(), line)?,
        },
        other => return Err(err(line, format!("unknown keyword `{other}`"))),
    };
    no_trailing(toks, line)?;
    Ok(instr)
}

/// Parses and validates circuit text.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let keyword = toks[0];

        if keyword == "qubits" {
            if circuit.is_some() {
                return Err(err(line, "duplicate `qubits` declaration"));
            }
            let n = parse_usize(toks.get(1).copied(), line, "qubit count")?;
            no_trailing(toks[2..].iter().copied(), line)?;
            circuit = Some(Circuit::new(n));
            continue;
        }
        let c = circuit
            .as_mut()
            .ok_or_else(|| err(line, "`qubits N` must come first"))?;

        match keyword {
            "accept" => {
                c.accept = Some(parse_usize(toks.get(1).copied(), line, "qubit index")?);
                no_trailing(toks[2..].iter().copied(), line)?;
            }
            "name" => {
                c.meta.name = Some(parse_label(toks.get(1).copied(), line)?);
                no_trailing(toks[2..].iter().copied(), line)?;
            }
            "rewinds" => {
                c.meta.rewind_budget =
                    Some(parse_usize(toks.get(1).copied(), line, "rewind budget")?);
                no_trailing(toks[2..].iter().copied(), line)?;
            }
            "description-bits" => {
                c.meta.description_bits =
                    Some(parse_usize(toks.get(1).copied(), line, "bit budget")?);
                no_trailing(toks[2..].iter().copied(), line)?;
            }
            _ => {
                let (body, cond) = match toks.iter().position(|t| *t == "if") {
                    Some(pos) => (
                        &toks[1..pos],
                        Some(parse_condition(&toks[pos + 1..], line)?),
                    ),
                    None => (&toks[1..], None),
                };
                let instr = parse_instruction(keyword, body, line)?;
                let instr = match cond {
                    Some(condition) => Instruction::Conditional {
                        condition,
                        inner: Box::new(instr),
                    },
                    None => instr,
                };
                c.push_at_line(instr, line);
            }
        }
    }
    let circuit = circuit.ok_or_else(|| err(1, "missing `qubits N` declaration"))?;
    circuit.validate()?;
    Ok(circuit)
}

fn write_instruction(out: &mut String, instr: &Instruction) {
    match instr {
        Instruction::Gate { kind, targets } => {
            let _ = write!(out, "gate {kind}");
            for t in targets {
                let _ = write!(out, " {t}");
            }
        }
        Instruction::Measure { qubit, label } => {
            let _ = write!(out, "measure {qubit} -> {label}");
        }
        Instruction::Postselect { qubit, bit } => {
            let _ = write!(out, "postselect {qubit} = {bit}");
        }
        Instruction::Snapshot { label } => {
            let _ = write!(out, "snapshot {label}");
        }
        Instruction::Rewind { label } => {
            let _ = write!(out, "rewind {label}");
        }
        Instruction::Clone { label } => {
            let _ = write!(out, "clone {label}");
        }
        Instruction::Conditional { condition, inner } => {
            write_instruction(out, inner);
            let _ = write!(out, " if {condition}");
        }
    }
}

/// Canonical text form; `parse_circuit` inverts it.
pub fn serialize_circuit(circuit: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubits {}", circuit.n_qubits);
    if let Some(name) = &circuit.meta.name {
        let _ = writeln!(out, "name {name}");
    }
    if let Some(k) = circuit.meta.rewind_budget {
        let _ = writeln!(out, "rewinds {k}");
    }
    if let Some(l) = circuit.meta.description_bits {
        let _ = writeln!(out, "description-bits {l}");
    }
    if let Some(q) = circuit.accept {
        let _ = writeln!(out, "accept {q}");
    }
    for instr in &circuit.instructions {
        write_instruction(&mut out, instr);
        out.push('\n');
    }
    out
}

impl std::fmt::Display for Circuit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&serialize_circuit(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_circuit() {
        let c = parse_circuit("qubits 1\ngate h 0\nmeasure 0 -> m0").unwrap();
        assert_eq!(c.n_qubits, 1);
        assert_eq!(c.instructions.len(), 2);
    }

    #[test]
    fn conditional_rewind_pattern() {
        let c =
            parse_circuit("qubits 2\nsnapshot s0\nmeasure 0 -> m0\nrewind s0 if m0 == 1").unwrap();
        assert_eq!(c.instructions.len(), 3);
        assert_eq!(
            c.instructions[2],
            Instruction::Conditional {
                condition: Condition::new([("m0", 1)]),
                inner: Box::new(Instruction::Rewind { label: "s0".into() }),
            }
        );
    }

    #[test]
    fn duplicate_targets_rejected() {
        let e = parse_circuit("qubits 1\ngate cz 0 0").unwrap_err();
        assert!(e.to_string().contains("duplicate targets"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let e = parse_circuit("qubits 1\n\n# note\ngate q 0").unwrap_err();
        assert_eq!(
            e,
            Error::Parse {
                line: 4,
                message: "unknown gate `q`".into()
            }
        );
        let e = parse_circuit("gate h 0").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_circuit("qubits 1\nmeasure 0 m").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn validation_errors_carry_line_numbers() {
        let e = parse_circuit("qubits 2\n\ngate h 2").unwrap_err();
        let Error::Validation(d) = e else { panic!() };
        assert_eq!(d[0].line, Some(3));
        assert!(d[0].message.contains("out of range"));
    }

    #[test]
    fn undefined_label_rejected() {
        assert!(parse_circuit("qubits 1\nrewind nowhere").is_err());
        assert!(parse_circuit("qubits 1\nsnapshot s\nrewind s if m == 1").is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let text = "qubits 3\nname demo\nrewinds 1\naccept 2\ngate hk -3 1\ngate rz 0.125 0\n\
                    gate ccz 0 1 2\nsnapshot s\nmeasure 0 -> a\nrewind s if a == 1\n\
                    measure 0 -> b if a == 1\npostselect 2 = 0 if a == 0 && b == 1\nclone s\n";
        let c = parse_circuit(text).unwrap();
        assert_eq!(serialize_circuit(&c), text);
        assert_eq!(parse_circuit(&serialize_circuit(&c)).unwrap(), c);
    }
}
