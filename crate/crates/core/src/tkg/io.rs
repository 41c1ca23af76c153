use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{EventLog, EventRecord};
use crate::error::{Error, Result};

/// Comment directive written by the serializer so that entity/relation
/// counts survive a round trip even when some ids never occur.
const BOUNDS_DIRECTIVE: &str = "# bounds";

/// Outcome of parsing an event file.
#[derive(Debug, Clone)]
pub struct ParsedLog {
    pub log: EventLog,
    pub duplicates_dropped: usize,
}

struct RawLine<'a> {
    line: usize,
    subject: &'a str,
    relation: &'a str,
    object: &'a str,
    time: f64,
}

/// Maps id tokens to dense ids. Purely numeric columns keep their integer
/// ids; anything else is interned in order of first appearance.
struct Interner<'a> {
    numeric: bool,
    ids: HashMap<&'a str, usize>,
    names: Vec<String>,
    max_id: Option<usize>,
}

impl<'a> Interner<'a> {
    fn new<I: IntoIterator<Item = &'a str>>(tokens: I) -> Self {
        let tokens: Vec<&str> = tokens.into_iter().collect();
        let numeric = !tokens.is_empty() && tokens.iter().all(|t| t.parse::<usize>().is_ok());
        Self {
            numeric,
            ids: HashMap::new(),
            names: Vec::new(),
            max_id: None,
        }
    }

    fn id(&mut self, token: &'a str) -> usize {
        if self.numeric {
            let id = token.parse::<usize>().expect("checked numeric");
            self.max_id = Some(self.max_id.map_or(id, |m| m.max(id)));
            return id;
        }
        let next = self.names.len();
        *self.ids.entry(token).or_insert_with(|| {
            self.names.push(token.to_string());
            next
        })
    }

    fn count(&self) -> usize {
        if self.numeric {
            self.max_id.map_or(0, |m| m + 1)
        } else {
            self.names.len()
        }
    }

    fn into_names(self) -> Option<Vec<String>> {
        (!self.numeric && !self.names.is_empty()).then_some(self.names)
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_bounds(line: &str) -> Option<(usize, usize)> {
    let rest = line.strip_prefix(BOUNDS_DIRECTIVE)?;
    let mut entities = None;
    let mut relations = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("entities", v)) => entities = v.parse().ok(),
            Some(("relations", v)) => relations = v.parse().ok(),
            _ => {}
        }
    }
    Some((entities?, relations?))
}

/// Parses tab-separated `subject relation object time` lines.
///
/// Blank lines and `#` comments are skipped; with `has_header` the first
/// remaining line is skipped too. The result is sorted stably by time with
/// exact duplicates removed.
pub fn parse_event_log<R: BufRead>(reader: R, has_header: bool) -> Result<ParsedLog> {
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;

    let mut bounds = None;
    let mut raw = Vec::with_capacity(lines.len());
    let mut header_pending = has_header;
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some(b) = parse_bounds(trimmed) {
                bounds = Some(b);
            }
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields = split_fields(trimmed);
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let time: f64 = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("cannot parse time {:?}", fields[3]),
        })?;
        if !time.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("time {:?} is not finite", fields[3]),
            });
        }
        if time < 0.0 {
            return Err(Error::Validation {
                line: line_no,
                message: format!("negative time {time}"),
            });
        }
        if fields[0] == fields[2] {
            return Err(Error::Validation {
                line: line_no,
                message: format!("self-loop on entity {:?}", fields[0]),
            });
        }
        raw.push(RawLine {
            line: line_no,
            subject: fields[0],
            relation: fields[1],
            object: fields[2],
            time,
        });
    }

    let mut entities = Interner::new(raw.iter().flat_map(|r| [r.subject, r.object]));
    let mut relations = Interner::new(raw.iter().map(|r| r.relation));
    let mut events = Vec::with_capacity(raw.len());
    for r in &raw {
        let subject = entities.id(r.subject);
        let relation = relations.id(r.relation);
        let object = entities.id(r.object);
        if subject == object {
            // e.g. "1" and "01" in a numeric column
            return Err(Error::Validation {
                line: r.line,
                message: format!("self-loop on entity {subject}"),
            });
        }
        events.push(EventRecord::new(subject, relation, object, r.time));
    }

    let mut n_entities = entities.count();
    let mut n_relations = relations.count();
    if let Some((be, br)) = bounds {
        if entities.numeric || raw.is_empty() {
            n_entities = n_entities.max(be);
        }
        if relations.numeric || raw.is_empty() {
            n_relations = n_relations.max(br);
        }
    }

    let (log, duplicates_dropped) = EventLog::from_events(events, n_entities, n_relations)?;
    let log = log.with_names(entities.into_names(), relations.into_names())?;
    Ok(ParsedLog {
        log,
        duplicates_dropped,
    })
}

impl EventLog {
    /// Writes the events with integer ids, preceded by a bounds directive.
    pub fn write_events<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{BOUNDS_DIRECTIVE} entities={} relations={}",
            self.n_entities(),
            self.n_relations()
        )?;
        for ev in self.events() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                ev.subject, ev.relation, ev.object, ev.time
            )?;
        }
        Ok(())
    }

    /// Renders [`EventLog::write_events`] into a string.
    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_events(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 output")
    }
}

fn write_vocab(path: &Path, names: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (id, name) in names.iter().enumerate() {
        writeln!(w, "{id}\t{name}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_vocab(path: &Path, expected: usize) -> Result<Option<Vec<String>>> {
    if !path.exists() {
        return Ok(None);
    }
    let reader = BufReader::new(File::open(path)?);
    let mut names = vec![None; expected];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse {
            line: i + 1,
            message: format!("bad vocabulary line in {}", path.display()),
        };
        let (id, name) = line.split_once('\t').ok_or_else(bad)?;
        let id: usize = id.parse().map_err(|_| bad())?;
        *names.get_mut(id).ok_or_else(bad)? = Some(name.to_string());
    }
    Ok(names.into_iter().collect())
}

fn sidecar(path: &Path, kind: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(format!(".{kind}"));
    PathBuf::from(s)
}

/// Writes the event file plus `<path>.entities` / `<path>.relations`
/// vocabulary sidecars (`id<TAB>name`) when names are known.
pub fn write_event_file(log: &EventLog, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    log.write_events(&mut w)?;
    w.flush()?;
    if let Some(names) = log.entity_names() {
        write_vocab(&sidecar(path, "entities"), names)?;
    }
    if let Some(names) = log.relation_names() {
        write_vocab(&sidecar(path, "relations"), names)?;
    }
    Ok(())
}

/// Reads an event file, picking up vocabulary sidecars when present.
pub fn read_event_file(path: &Path, has_header: bool) -> Result<ParsedLog> {
    let parsed = parse_event_log(BufReader::new(File::open(path)?), has_header)?;
    let log = parsed.log;
    let (entity_names, relation_names) = if log.entity_names().is_none() {
        (
            read_vocab(&sidecar(path, "entities"), log.n_entities())?,
            read_vocab(&sidecar(path, "relations"), log.n_relations())?,
        )
    } else {
        (
            log.entity_names().map(<[_]>::to_vec),
            log.relation_names().map(<[_]>::to_vec),
        )
    };
    Ok(ParsedLog {
        log: log.with_names(entity_names, relation_names)?,
        duplicates_dropped: parsed.duplicates_dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<ParsedLog> {
        parse_event_log(text.as_bytes(), false)
    }

    #[test]
    fn duplicate_dropped() {
        let p = parse("a\tCOOP\tb\t0.0\na\tCOOP\tb\t0.0\n").unwrap();
        assert_eq!(p.log.len(), 1);
        assert_eq!(p.duplicates_dropped, 1);
    }

    #[test]
    fn self_loop_rejected() {
        match parse("x\tR\ty\t0\na\tCOOP\ta\t1.0\n") {
            Err(Error::Validation { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sorted_by_time() {
        let p = parse("a\tR\tb\t2.0\nc\tR\td\t1.0\n").unwrap();
        let names = p.log.entity_names().unwrap();
        let first = p.log.events()[0];
        assert_eq!(names[first.subject], "c");
        assert_eq!(names[first.object], "d");
        assert_eq!(first.time, 1.0);
        assert_eq!(names[p.log.events()[1].subject], "a");
    }

    #[test]
    fn space_separated_fallback() {
        let p = parse("a COOP b 0.0\n").unwrap();
        assert_eq!(p.log.len(), 1);
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            parse("a\tR\tb\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("# c\na\tR\tb\tnoon\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("a\tR\tb\t-1\n"),
            Err(Error::Validation { line: 1, .. })
        ));
    }

    #[test]
    fn header_and_comments() {
        let p = parse_event_log("# note\ns\tr\to\tt\n0\t0\t1\t0.5\n".as_bytes(), true).unwrap();
        assert_eq!(p.log.len(), 1);
        assert!(p.log.entity_names().is_none());
        assert_eq!(p.log.n_entities(), 2);
    }

    #[test]
    fn ties_keep_file_order() {
        let p = parse("0\t0\t1\t1\n2\t0\t3\t1\n1\t0\t2\t0\n").unwrap();
        let subjects: Vec<_> = p.log.events().iter().map(|e| e.subject).collect();
        assert_eq!(subjects, vec![1, 0, 2]);
    }

    #[test]
    fn file_round_trip_with_vocab() {
        let dir = std::env::temp_dir().join(format!("ke-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("events.tsv");
        let p = parse("usa\tCOOP\tchina\t3\nchina\tTHREAT\tindia\t1.5\n").unwrap();
        write_event_file(&p.log, &path).unwrap();
        let back = read_event_file(&path, false).unwrap();
        assert_eq!(back.log, p.log);
        std::fs::remove_dir_all(&dir).ok();
    }

    fn arb_log() -> impl Strategy<Value = EventLog> {
        (2usize..6, 1usize..4).prop_flat_map(|(ne, nr)| {
            prop::collection::vec((0..ne, 0..nr, 0..ne, 0u32..1000), 0..30).prop_map(move |rows| {
                let events = rows
                    .into_iter()
                    .filter(|(s, _, o, _)| s != o)
                    .map(|(s, r, o, t)| EventRecord::new(s, r, o, t as f64 / 7.0))
                    .collect();
                EventLog::from_events(events, ne, nr).unwrap().0
            })
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_identity(log in arb_log()) {
            let back = parse(&log.to_tsv()).unwrap();
            prop_assert_eq!(back.duplicates_dropped, 0);
            prop_assert_eq!(back.log, log);
        }
    }
}
