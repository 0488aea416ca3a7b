//! The text command channel (standing in for the paper's voice commands).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Mode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verb", content = "arg", rename_all = "lowercase")]
pub enum TextCommand {
    Label(String),
    Mode(Mode),
    Undo,
    Redo,
    Propagate(bool),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CommandParseError {
    #[error("empty command")]
    Empty,
    #[error("unknown verb {0:?}")]
    UnknownVerb(String),
    #[error("{verb}: expected {expected}")]
    BadArgument { verb: &'static str, expected: &'static str },
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
}

impl FromStr for TextCommand {
    type Err = CommandParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut words = s.split_whitespace();
        let verb = words.next().ok_or(CommandParseError::Empty)?.to_ascii_lowercase();
        let rest: Vec<&str> = words.collect();
        let none = |verb: &'static str, cmd: TextCommand| {
            if rest.is_empty() {
                Ok(cmd)
            } else {
                Err(CommandParseError::BadArgument { verb, expected: "no argument" })
            }
        };
        match verb.as_str() {
            "label" => {
                if rest.is_empty() {
                    return Err(CommandParseError::BadArgument { verb: "label", expected: "a label name" });
                }
                Ok(TextCommand::Label(rest.join(" ")))
            }
            "mode" => match rest.as_slice() {
                [m] => Ok(TextCommand::Mode(m.parse()?)),
                _ => Err(CommandParseError::BadArgument { verb: "mode", expected: "one mode name" }),
            },
            "undo" => none("undo", TextCommand::Undo),
            "redo" => none("redo", TextCommand::Redo),
            "propagate" => match rest.as_slice() {
                [a] if a.eq_ignore_ascii_case("on") => Ok(TextCommand::Propagate(true)),
                [a] if a.eq_ignore_ascii_case("off") => Ok(TextCommand::Propagate(false)),
                _ => Err(CommandParseError::BadArgument { verb: "propagate", expected: "on or off" }),
            },
            _ => Err(CommandParseError::UnknownVerb(verb)),
        }
    }
}

impl fmt::Display for TextCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextCommand::Label(n) => write!(f, "label {n}"),
            TextCommand::Mode(m) => write!(f, "mode {m}"),
            TextCommand::Undo => f.write_str("undo"),
            TextCommand::Redo => f.write_str("redo"),
            TextCommand::Propagate(on) => write!(f, "propagate {}", if *on { "on" } else { "off" }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        assert_eq!("label chair".parse(), Ok(TextCommand::Label("chair".into())));
        assert_eq!("  LABEL  coffee table ".parse(), Ok(TextCommand::Label("coffee table".into())));
        assert_eq!("mode training-and-prediction".parse(), Ok(TextCommand::Mode(Mode::TrainingAndPrediction)));
        assert_eq!("propagate off".parse(), Ok(TextCommand::Propagate(false)));
        assert_eq!("undo".parse(), Ok(TextCommand::Undo));
        assert_eq!("".parse::<TextCommand>(), Err(CommandParseError::Empty));
        assert!(matches!("paint it".parse::<TextCommand>(), Err(CommandParseError::UnknownVerb(_))));
        assert!(matches!("undo twice".parse::<TextCommand>(), Err(CommandParseError::BadArgument { .. })));
        assert!(matches!("mode flying".parse::<TextCommand>(), Err(CommandParseError::UnknownMode(_))));
        for c in ["label a b", "mode prediction", "undo", "redo", "propagate on"] {
            assert_eq!(c.parse::<TextCommand>().unwrap().to_string(), c);
        }
    }
}
