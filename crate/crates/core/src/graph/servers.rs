use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::cost::{Capacity, Imbalance};
use crate::format::{FormatError, LineReader};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServerId(pub u16);

impl ServerId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ServerSetError {
    #[error("a server set needs at least one server")]
    Empty,
    #[error("duplicate server id `{0}`")]
    Duplicate(String),
    #[error("too many servers ({0}); at most 65535 are supported")]
    TooMany(usize),
}

/// The servers, their storage capacities and the load-imbalance bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerSet {
    names: Vec<String>,
    index: HashMap<String, ServerId>,
    capacities: Vec<Capacity>,
    imbalance: Imbalance,
}

impl ServerSet {
    pub fn new<I, S>(servers: I, imbalance: Imbalance) -> Result<Self, ServerSetError>
    where
        I: IntoIterator<Item = (S, Capacity)>,
        S: Into<String>,
    {
        let mut set = ServerSet {
            names: Vec::new(),
            index: HashMap::new(),
            capacities: Vec::new(),
            imbalance,
        };
        for (name, cap) in servers {
            let name = name.into();
            if set.index.contains_key(&name) {
                return Err(ServerSetError::Duplicate(name));
            }
            if set.names.len() >= u16::MAX as usize {
                return Err(ServerSetError::TooMany(set.names.len() + 1));
            }
            set.index
                .insert(name.clone(), ServerId(set.names.len() as u16));
            set.names.push(name);
            set.capacities.push(cap);
        }
        if set.names.is_empty() {
            return Err(ServerSetError::Empty);
        }
        Ok(set)
    }

    /// `count` unbounded servers named `s0..s{count-1}`.
    pub fn uniform(count: usize, imbalance: Imbalance) -> Result<Self, ServerSetError> {
        Self::new(
            (0..count).map(|i| (format!("s{i}"), Capacity::UNBOUNDED)),
            imbalance,
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = ServerId> + '_ {
        (0..self.names.len() as u16).map(ServerId)
    }

    pub fn get(&self, name: &str) -> Option<ServerId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, s: ServerId) -> &str {
        &self.names[s.index()]
    }

    pub fn capacity(&self, s: ServerId) -> Capacity {
        self.capacities[s.index()]
    }

    pub fn imbalance(&self) -> Imbalance {
        self.imbalance
    }

    pub fn set_imbalance(&mut self, imbalance: Imbalance) {
        self.imbalance = imbalance;
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "#servers v1")?;
        for s in self.ids() {
            match self.capacity(s).0 {
                Some(c) => writeln!(w, "{} {}", self.name(s), c)?,
                None => writeln!(w, "{}", self.name(s))?,
            }
        }
        writeln!(w, "epsilon {}", self.imbalance)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("utf8")
    }
}

/// Parses a `#servers v1` stream. Without an `epsilon` directive the
/// imbalance bound defaults to 2% of the mean load.
pub fn load_servers<R: BufRead>(source: R) -> Result<ServerSet, FormatError> {
    let mut lines = LineReader::new(source, "servers");
    lines.expect_header("#servers v1")?;
    let mut servers: Vec<(String, Capacity)> = Vec::new();
    let mut seen_lines: HashMap<String, usize> = HashMap::new();
    let mut imbalance = None;
    while let Some((lineno, toks)) = lines.next_tokens()? {
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        match toks.as_slice() {
            ["epsilon", mode, value] => {
                if imbalance.is_some() {
                    return Err(lines.error_at(lineno, "repeated epsilon directive"));
                }
                imbalance = Some(
                    Imbalance::from_parts(mode, value)
                        .map_err(|e| lines.error_at(lineno, format!("bad epsilon: {e}")))?,
                );
            }
            [name] | [name, _] => {
                let cap = match toks.get(1) {
                    Some(c) => c
                        .parse::<Capacity>()
                        .map_err(|e| lines.error_at(lineno, format!("bad capacity: {e}")))?,
                    None => Capacity::UNBOUNDED,
                };
                if let Some(prev) = seen_lines.insert(name.to_string(), lineno) {
                    return Err(lines.error_at(
                        lineno,
                        format!("duplicate server id `{name}` (first declared on line {prev})"),
                    ));
                }
                servers.push((name.to_string(), cap));
            }
            _ => return Err(lines.error_at(lineno, format!("malformed line `{}`", toks.join(" ")))),
        }
    }
    ServerSet::new(servers, imbalance.unwrap_or_default())
        .map_err(|e| lines.error_at(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Cost;

    #[test]
    fn parses_capacities_and_epsilon() {
        let set =
            load_servers("#servers v1\ns1 10\ns2\ns3 inf\nepsilon abs 1.5\n".as_bytes()).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(
            set.capacity(ServerId(0)),
            Capacity(Some(Cost::from_int(10)))
        );
        assert_eq!(set.capacity(ServerId(1)), Capacity::UNBOUNDED);
        assert_eq!(set.capacity(ServerId(2)), Capacity::UNBOUNDED);
        assert_eq!(set.imbalance(), Imbalance::Absolute(Cost::ratio(3, 2)));
        let again = load_servers(set.to_text().as_bytes()).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn defaults_to_two_percent_relative() {
        let set = load_servers("#servers v1\ns0\n".as_bytes()).unwrap();
        assert_eq!(set.imbalance(), Imbalance::Relative(Cost::ratio(2, 100)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(load_servers("#servers v1\n".as_bytes()).is_err());
        assert!(load_servers("#servers v1\ns0\ns0\n".as_bytes()).is_err());
        assert!(load_servers("#servers v1\ns0 -1\n".as_bytes()).is_err());
        assert!(load_servers("#servers v1\ns0\nepsilon foo 1\n".as_bytes()).is_err());
    }
}
