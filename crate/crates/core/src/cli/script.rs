use super::CliError;

/// Event script: one command per line, `//` starts a comment.
///
/// ```text
/// @1000                       advance the clock to 1000 ms
/// recv #Greeting(Meeting)     the user sends a dialogue act
/// set $UserModel.user ex:age 30   external store update
/// newsession
/// ```
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Script {
    pub lines: Vec<ScriptLine>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScriptLine {
    /// 1-based line number in the script file.
    pub line: usize,
    pub cmd: ScriptCmd,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScriptCmd {
    At(u64),
    Recv(String),
    Set {
        subject: String,
        predicate: String,
        value: String,
    },
    NewSession,
}

pub fn parse_script(text: &str) -> Result<Script, CliError> {
    let mut lines = Vec::new();
    let mut clock = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = strip_comment(raw).trim();
        if l.is_empty() {
            continue;
        }
        let err = |message: String| CliError::Script { line, message };
        let cmd = if let Some(ms) = l.strip_prefix('@') {
            let ms: u64 = ms
                .trim()
                .parse()
                .map_err(|_| err(format!("bad time `{ms}`")))?;
            if ms < clock {
                return Err(err(format!("time goes back from {clock} to {ms}")));
            }
            clock = ms;
            ScriptCmd::At(ms)
        } else if let Some(da) = l.strip_prefix("recv ") {
            ScriptCmd::Recv(da.trim().to_string())
        } else if let Some(rest) = l.strip_prefix("set ") {
            let (subject, predicate, value) = split_set(rest).map_err(err)?;
            ScriptCmd::Set {
                subject,
                predicate,
                value,
            }
        } else if l == "newsession" {
            ScriptCmd::NewSession
        } else {
            return Err(err(format!("unknown command `{l}`")));
        };
        lines.push(ScriptLine { line, cmd });
    }
    Ok(Script { lines })
}

/// `//` outside a quoted string.
fn strip_comment(l: &str) -> &str {
    let mut in_str = false;
    let mut prev = ' ';
    for (i, c) in l.char_indices() {
        match c {
            '"' if prev != '\\' => in_str = !in_str,
            '/' if !in_str && prev == '/' => return &l[..i - 1],
            _ => {}
        }
        prev = c;
    }
    l
}

/// Subject and predicate are single words; the value is the rest.
pub(crate) fn split_set(rest: &str) -> Result<(String, String, String), String> {
    let mut it = rest.trim().splitn(3, char::is_whitespace);
    match (it.next(), it.next(), it.next()) {
        (Some(s), Some(p), Some(v)) if !v.trim().is_empty() => {
            Ok((s.to_string(), p.to_string(), v.trim().to_string()))
        }
        _ => Err("expected `set <subject> <predicate> <value>`".into()),
    }
}
