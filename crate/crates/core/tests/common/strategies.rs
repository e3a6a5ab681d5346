//! Generators for grammar values.

use dronedialog::fact::Fact;
use dronedialog::grammar::{Command, Question, SummaryDirective, TurnDirective};
use proptest::prelude::*;

pub fn token() -> impl Strategy<Value = String> {
    "[a-z][a-z-]{1,8}".prop_filter("reserved word", |t| !matches!(t.as_str(), "no" | "an"))
}

pub fn fact() -> impl Strategy<Value = Fact> {
    (token(), prop::collection::vec(token(), 0..3), any::<bool>()).prop_map(|(label, attrs, present)| {
        let attrs: Vec<&str> = attrs.iter().map(String::as_str).collect();
        if present {
            Fact::present(label, &attrs)
        } else {
            Fact::absent(label, &attrs)
        }
    })
}

pub fn free_text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 ,.;:!?'-]{1,40}".prop_map(|s| s.trim().to_string())
}

pub fn question() -> impl Strategy<Value = Question> {
    prop_oneof![
        fact().prop_map(|f| Question::presence(&f.phrase())),
        token().prop_map(|t| Question::count(&t)),
        (token(), token()).prop_map(|(a, s)| Question::attribute(&a, &s)),
        free_text()
            .prop_filter("non-empty", |t| !t.is_empty())
            .prop_map(|t| Question::open(&t)),
    ]
}

pub fn directive() -> impl Strategy<Value = TurnDirective> {
    (prop::sample::select(Command::ALL.to_vec()), question(), any::<bool>()).prop_map(|(command, q, with)| {
        let question = match command {
            Command::AskQuestion => Some(q),
            c if c.accepts_question() && with => Some(q),
            _ => None,
        };
        TurnDirective::new(command, question)
    })
}

pub fn summary() -> impl Strategy<Value = SummaryDirective> {
    (free_text(), free_text(), prop::collection::vec(fact(), 0..5)).prop_map(|(description, caption, targets)| {
        SummaryDirective {
            description,
            caption,
            validation_targets: targets,
        }
    })
}
