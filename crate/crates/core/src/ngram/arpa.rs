use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::model::{NGramModel, OrderTable};
use super::{LmError, MAX_ORDER};

/// Writes the model as ARPA text. Entries appear in id order; the backoff
/// column is left out at the top order and wherever it is zero.
pub fn write_arpa<W: Write>(model: &NGramModel, mut out: W) -> std::io::Result<()> {
    writeln!(out, "\\data\\")?;
    for table in model.tables() {
        writeln!(out, "ngram {}={}", table.order(), table.len())?;
    }
    let top = model.order();
    for table in model.tables() {
        writeln!(out)?;
        writeln!(out, "\\{}-grams:", table.order())?;
        for (key, prob, backoff) in table.iter() {
            write!(out, "{prob}\t")?;
            for (i, &id) in key.iter().enumerate() {
                if i > 0 {
                    out.write_all(b" ")?;
                }
                out.write_all(model.word(id).as_bytes())?;
            }
            if table.order() < top && backoff != 0.0 {
                write!(out, "\t{backoff}")?;
            }
            out.write_all(b"\n")?;
        }
    }
    writeln!(out)?;
    writeln!(out, "\\end\\")?;
    out.flush()
}

pub fn emit_arpa(model: &NGramModel, path: impl AsRef<Path>) -> Result<(), LmError> {
    let file = std::fs::File::create(path)?;
    write_arpa(model, BufWriter::new(file))?;
    Ok(())
}

pub fn parse_arpa(path: impl AsRef<Path>) -> Result<NGramModel, LmError> {
    let file = std::fs::File::open(path)?;
    read_arpa(BufReader::new(file))
}

enum State {
    Preamble,
    Header,
    Section(usize),
    End,
}

fn parse_err(line: usize, message: impl Into<String>) -> LmError {
    LmError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_float(tok: &str, line: usize) -> Result<f32, LmError> {
    tok.parse::<f32>()
        .map_err(|_| parse_err(line, format!("invalid number {tok:?}")))
}

/// Parses ARPA text. Word ids follow first appearance in the file.
pub fn read_arpa<R: BufRead>(input: R) -> Result<NGramModel, LmError> {
    let mut state = State::Preamble;
    let mut declared: Vec<u64> = Vec::new();
    let mut sections: Vec<Vec<(Vec<u32>, f32, f32)>> = Vec::new();
    let mut words: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();

    let check_section = |sections: &Vec<Vec<(Vec<u32>, f32, f32)>>, declared: &[u64], n: usize| {
        let found = sections[n - 1].len() as u64;
        if found != declared[n - 1] {
            return Err(LmError::CountMismatch {
                order: n,
                declared: declared[n - 1],
                found,
            });
        }
        Ok(())
    };

    let mut last_line = 0;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line?;
        let text = line.trim();
        match state {
            State::Preamble => {
                if text == "\\data\\" {
                    state = State::Header;
                }
            }
            State::Header => {
                if text.is_empty() {
                    continue;
                }
                if let Some(rest) = text.strip_prefix("ngram ") {
                    let (n, count) = rest
                        .split_once('=')
                        .ok_or_else(|| parse_err(lineno, "expected `ngram N=count`"))?;
                    let n: usize = n
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad order {n:?}")))?;
                    let count: u64 = count
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad count {count:?}")))?;
                    if n != declared.len() + 1 || n > MAX_ORDER {
                        return Err(parse_err(lineno, format!("unexpected order {n}")));
                    }
                    declared.push(count);
                } else if text == "\\1-grams:" {
                    if declared.is_empty() {
                        return Err(parse_err(lineno, "no ngram counts in \\data\\ header"));
                    }
                    sections = vec![Vec::new(); declared.len()];
                    state = State::Section(1);
                } else {
                    return Err(parse_err(
                        lineno,
                        format!("unexpected header line {text:?}"),
                    ));
                }
            }
            State::Section(n) => {
                if text.is_empty() {
                    continue;
                }
                if text.starts_with('\\') {
                    check_section(&sections, &declared, n)?;
                    if text == "\\end\\" {
                        if n != declared.len() {
                            return Err(parse_err(lineno, format!("missing \\{}-grams:", n + 1)));
                        }
                        state = State::End;
                    } else if text == format!("\\{}-grams:", n + 1) && n < declared.len() {
                        state = State::Section(n + 1);
                    } else {
                        return Err(parse_err(lineno, format!("unexpected section {text:?}")));
                    }
                    continue;
                }
                let mut fields = text.split_whitespace();
                let prob = parse_float(fields.next().unwrap_or_default(), lineno)?;
                let mut key = Vec::with_capacity(n);
                for _ in 0..n {
                    let w = fields
                        .next()
                        .ok_or_else(|| parse_err(lineno, format!("expected {n} words")))?;
                    let id = match index.get(w) {
                        Some(&id) => id,
                        None => {
                            if n > 1 {
                                return Err(parse_err(
                                    lineno,
                                    format!("word {w:?} has no unigram entry"),
                                ));
                            }
                            words.push(w.to_string());
                            let id = (words.len() - 1) as u32;
                            index.insert(w.to_string(), id);
                            id
                        }
                    };
                    key.push(id);
                }
                let backoff = match fields.next() {
                    Some(tok) => parse_float(tok, lineno)?,
                    None => 0.0,
                };
                if fields.next().is_some() {
                    return Err(parse_err(lineno, "trailing fields"));
                }
                sections[n - 1].push((key, prob, backoff));
            }
            State::End => {
                if !text.is_empty() {
                    return Err(parse_err(lineno, "content after \\end\\"));
                }
            }
        }
    }
    match state {
        State::End => {}
        State::Section(n) => {
            check_section(&sections, &declared, n)?;
            return Err(parse_err(last_line, "missing \\end\\"));
        }
        _ => return Err(parse_err(last_line, "missing \\data\\ section")),
    }

    let tables = sections
        .into_iter()
        .enumerate()
        .map(|(i, entries)| OrderTable::new(i + 1, entries))
        .collect();
    Ok(NGramModel::from_tables(words, tables))
}
