use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid layout: {0}")]
    Invalid(String),
    #[error("cannot read layout {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Index of a room within its [`Layout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RoomId(pub usize);

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A validated room graph with victim and rubble placement rules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    rooms: Vec<String>,
    adjacency: Vec<Vec<RoomId>>,
    victim_candidates: Vec<RoomId>,
    rubble: Vec<bool>,
    num_victims: usize,
    medic_start: RoomId,
    engineer_start: Option<RoomId>,
    max_steps: usize,
}

impl Layout {
    pub fn rooms(&self) -> &[String] {
        &self.rooms
    }

    pub fn num_rooms(&self) -> usize {
        self.rooms.len()
    }

    pub fn room_name(&self, room: RoomId) -> &str {
        &self.rooms[room.0]
    }

    /// Neighbours of `room`, sorted by index.
    pub fn neighbors(&self, room: RoomId) -> &[RoomId] {
        &self.adjacency[room.0]
    }

    pub fn adjacent(&self, a: RoomId, b: RoomId) -> bool {
        self.adjacency[a.0].binary_search(&b).is_ok()
    }

    pub fn victim_candidates(&self) -> &[RoomId] {
        &self.victim_candidates
    }

    pub fn has_rubble(&self, room: RoomId) -> bool {
        self.rubble[room.0]
    }

    pub fn rubble_rooms(&self) -> impl Iterator<Item = RoomId> + '_ {
        self.rubble
            .iter()
            .enumerate()
            .filter(|(_, r)| **r)
            .map(|(i, _)| RoomId(i))
    }

    pub fn num_victims(&self) -> usize {
        self.num_victims
    }

    pub fn medic_start(&self) -> RoomId {
        self.medic_start
    }

    pub fn engineer_start(&self) -> Option<RoomId> {
        self.engineer_start
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Result<Self, LayoutError> {
        if max_steps == 0 {
            return Err(LayoutError::Invalid("max_steps must be at least 1".into()));
        }
        self.max_steps = max_steps;
        Ok(self)
    }

    /// Best achievable episode return: every victim healed.
    pub fn optimal_return(&self) -> f64 {
        super::HEAL_REWARD * self.num_victims as f64
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LayoutError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LayoutError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses the line-oriented layout format:
    ///
    /// ```text
    /// # comment
    /// room <id>
    /// edge <id> <id>
    /// victim_room <id>
    /// rubble <id>
    /// victims <n>
    /// start medic <id>
    /// start engineer <id>
    /// max_steps <n>
    /// ```
    ///
    /// `max_steps` defaults to `10 * rooms + 10`.
    pub fn parse(text: &str) -> Result<Self, LayoutError> {
        let mut names: Vec<String> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut edges: Vec<(usize, String, String)> = Vec::new();
        let mut victim_rooms: Vec<(usize, String)> = Vec::new();
        let mut rubble_rooms: Vec<(usize, String)> = Vec::new();
        let mut victims: Option<usize> = None;
        let mut medic: Option<(usize, String)> = None;
        let mut engineer: Option<(usize, String)> = None;
        let mut max_steps: Option<usize> = None;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| LayoutError::Parse {
                line: line_no,
                message,
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let count = |n: usize| -> Result<(), LayoutError> {
                if tokens.len() == n {
                    Ok(())
                } else {
                    Err(parse_err(format!(
                        "`{}` expects {} argument(s), found {}",
                        tokens[0],
                        n - 1,
                        tokens.len() - 1
                    )))
                }
            };
            let number = |tok: &str| -> Result<usize, LayoutError> {
                tok.parse::<usize>().map_err(|_| {
                    parse_err(format!("expected a non-negative integer, found `{tok}`"))
                })
            };
            match tokens[0] {
                "room" => {
                    count(2)?;
                    let name = tokens[1].to_string();
                    if index.contains_key(&name) {
                        return Err(parse_err(format!("duplicate room `{name}`")));
                    }
                    index.insert(name.clone(), names.len());
                    names.push(name);
                }
                "edge" => {
                    count(3)?;
                    edges.push((line_no, tokens[1].into(), tokens[2].into()));
                }
                "victim_room" => {
                    count(2)?;
                    victim_rooms.push((line_no, tokens[1].into()));
                }
                "rubble" => {
                    count(2)?;
                    rubble_rooms.push((line_no, tokens[1].into()));
                }
                "victims" => {
                    count(2)?;
                    victims = Some(number(tokens[1])?);
                }
                "start" => {
                    count(3)?;
                    let who = (line_no, tokens[2].to_string());
                    match tokens[1] {
                        "medic" => medic = Some(who),
                        "engineer" => engineer = Some(who),
                        other => {
                            return Err(parse_err(format!(
                                "unknown agent `{other}`, expected medic or engineer"
                            )))
                        }
                    }
                }
                "max_steps" => {
                    count(2)?;
                    max_steps = Some(number(tokens[1])?);
                }
                other => return Err(parse_err(format!("unknown directive `{other}`"))),
            }
        }

        let resolve = |line: usize, name: &str| -> Result<RoomId, LayoutError> {
            index
                .get(name)
                .map(|&i| RoomId(i))
                .ok_or_else(|| LayoutError::Invalid(format!("line {line}: unknown room `{name}`")))
        };

        if names.is_empty() {
            return Err(LayoutError::Invalid("layout declares no rooms".into()));
        }
        let n = names.len();
        let mut adjacency = vec![Vec::new(); n];
        for (line, a, b) in &edges {
            let (a, b) = (resolve(*line, a)?, resolve(*line, b)?);
            if a == b {
                return Err(LayoutError::Invalid(format!(
                    "line {line}: self-loop on room `{}`",
                    names[a.0]
                )));
            }
            adjacency[a.0].push(b);
            adjacency[b.0].push(a);
        }
        for adj in &mut adjacency {
            adj.sort();
            adj.dedup();
        }

        let mut victim_candidates = Vec::new();
        for (line, name) in &victim_rooms {
            victim_candidates.push(resolve(*line, name)?);
        }
        victim_candidates.sort();
        victim_candidates.dedup();

        let mut rubble = vec![false; n];
        for (line, name) in &rubble_rooms {
            rubble[resolve(*line, name)?.0] = true;
        }

        let num_victims =
            victims.ok_or_else(|| LayoutError::Invalid("missing `victims <n>`".into()))?;
        let (line, name) =
            medic.ok_or_else(|| LayoutError::Invalid("missing `start medic <id>`".into()))?;
        let medic_start = resolve(line, &name)?;
        let engineer_start = match engineer {
            Some((line, name)) => Some(resolve(line, &name)?),
            None => None,
        };

        let layout = Layout {
            rooms: names,
            adjacency,
            victim_candidates,
            rubble,
            num_victims,
            medic_start,
            engineer_start,
            max_steps: max_steps.unwrap_or(10 * n + 10),
        };
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<(), LayoutError> {
        if self.max_steps == 0 {
            return Err(LayoutError::Invalid("max_steps must be at least 1".into()));
        }
        if self.num_victims == 0 {
            return Err(LayoutError::Invalid(
                "at least one victim is required".into(),
            ));
        }
        if self.num_victims > self.victim_candidates.len() {
            return Err(LayoutError::Invalid(format!(
                "num_victims ({}) exceeds the number of victim candidate rooms ({})",
                self.num_victims,
                self.victim_candidates.len()
            )));
        }
        // Connectivity by BFS from room 0.
        let mut seen = vec![false; self.rooms.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(r) = queue.pop_front() {
            for next in &self.adjacency[r] {
                if !seen[next.0] {
                    seen[next.0] = true;
                    queue.push_back(next.0);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(LayoutError::Invalid(format!(
                "room graph is disconnected: `{}` is unreachable from `{}`",
                self.rooms[lost], self.rooms[0]
            )));
        }
        Ok(())
    }

    /// Renders the layout back into its file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in &self.rooms {
            out.push_str(&format!("room {name}\n"));
        }
        for (a, adj) in self.adjacency.iter().enumerate() {
            for b in adj.iter().filter(|b| b.0 > a) {
                out.push_str(&format!("edge {} {}\n", self.rooms[a], self.rooms[b.0]));
            }
        }
        for r in &self.victim_candidates {
            out.push_str(&format!("victim_room {}\n", self.rooms[r.0]));
        }
        for r in self.rubble_rooms() {
            out.push_str(&format!("rubble {}\n", self.rooms[r.0]));
        }
        out.push_str(&format!("victims {}\n", self.num_victims));
        out.push_str(&format!("start medic {}\n", self.rooms[self.medic_start.0]));
        if let Some(e) = self.engineer_start {
            out.push_str(&format!("start engineer {}\n", self.rooms[e.0]));
        }
        out.push_str(&format!("max_steps {}\n", self.max_steps));
        out
    }
}
