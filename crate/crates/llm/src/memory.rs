use crate::message::{ChatMessage, Role};

/// Number of recent non-system messages kept in every request.
pub const RECENT_CHATS: usize = 4;

/// Sliding-window memory: the system prompt, the original query, and the
/// last four non-system messages in order. The query is not repeated when
/// it is already among those four.
pub fn trim_memory(history: &[ChatMessage], original_query: &ChatMessage) -> Vec<ChatMessage> {
    let system = history.iter().find(|m| m.role == Role::System);
    let rest: Vec<&ChatMessage> = history.iter().filter(|m| m.role != Role::System).collect();
    let recent = &rest[rest.len().saturating_sub(RECENT_CHATS)..];
    let mut out = Vec::with_capacity(RECENT_CHATS + 2);
    out.extend(system.cloned());
    if !recent.contains(&original_query) {
        out.push(original_query.clone());
    }
    out.extend(recent.iter().map(|m| (*m).clone()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(n: usize) -> Vec<ChatMessage> {
        let mut h = vec![ChatMessage::system("sys"), ChatMessage::user("query")];
        for i in 0..n {
            h.push(if i % 2 == 0 {
                ChatMessage::assistant(format!("a{i}"))
            } else {
                ChatMessage::tool("t", format!("o{i}"))
            });
        }
        h
    }

    #[test]
    fn short_history_is_kept() {
        let h = history(0);
        assert_eq!(trim_memory(&h, &h[1]), h);
    }

    #[test]
    fn long_history_keeps_query_and_last_four() {
        let h = history(8);
        assert_eq!(h.len(), 10);
        let t = trim_memory(&h, &h[1]);
        let mut want = vec![h[0].clone(), h[1].clone()];
        want.extend_from_slice(&h[6..]);
        assert_eq!(t, want);
    }

    #[test]
    fn query_is_not_duplicated() {
        let h = history(3);
        let t = trim_memory(&h, &h[1]);
        assert_eq!(t, h);
        assert_eq!(t.iter().filter(|m| m.content == "query").count(), 1);
    }
}
