use proptest::prelude::*;
use rtlsmith_llm::{memory_contract_holds, trim_memory, ChatMessage, Role};

fn message() -> impl Strategy<Value = ChatMessage> {
    (0..3u8, "[a-c]{1,3}").prop_map(|(r, text)| match r {
        0 => ChatMessage::user(text),
        1 => ChatMessage::assistant(text),
        _ => ChatMessage::tool("t", text),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn window_is_system_query_and_last_four(rest in prop::collection::vec(message(), 0..29)) {
        let system = ChatMessage::system("sys");
        let query = ChatMessage::user("the original query");
        let mut history = vec![system.clone(), query.clone()];
        history.extend(rest);
        let sent = trim_memory(&history, &query);

        let chats: Vec<ChatMessage> = history.iter().filter(|m| m.role != Role::System).cloned().collect();
        let last4: Vec<ChatMessage> = chats[chats.len().saturating_sub(4)..].to_vec();
        let mut want = vec![system];
        if !last4.contains(&query) {
            want.push(query.clone());
        }
        want.extend(last4);
        prop_assert_eq!(&sent, &want);
        prop_assert!(memory_contract_holds(&sent, &history, &query));
        prop_assert_eq!(sent.iter().filter(|m| **m == query).count(), 1);
    }
}
