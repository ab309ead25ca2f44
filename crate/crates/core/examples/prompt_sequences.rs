//! Build the exact encoder input and decoder target for one role question,
//! with and without a retrieved demonstration, and split a decoded target
//! back into answers.
//!
//! ```bash
//! cargo run --example prompt_sequences
//! ```

use argqa::demo_store::{Demonstration, RetrievalResult};
use argqa::postprocess::split_answers;
use argqa::prompt::{self, PromptOptions};
use argqa::{RoleInstance, Span, SpecialTokens};

pub fn run_example() -> anyhow::Result<()> {
    let tokens = SpecialTokens::default();
    let context = "John M is nominated by Adam to be chief justice.";
    let at = |s: &str| {
        let start = context.find(s).unwrap();
        Span::new(start, start + s.len(), s)
    };
    let instance = RoleInstance {
        id: "nyt:0:Person".into(),
        doc_id: "nyt".into(),
        event_id: "nyt:0".into(),
        context: context.into(),
        event_type: "Personnel:Nominate".into(),
        trigger: at("nominated"),
        role: "Person".into(),
        question: "Who are nominated?".into(),
        gold_args: vec![at("John M"), at("Adam")],
    };

    let marked = prompt::mark_trigger(context, &instance.trigger, &tokens)?;
    println!("marked:  {marked}");

    let bare = prompt::build_prompt(&instance, None, &PromptOptions::default())?;
    println!("no demo: {}", bare.input_seq);
    println!("target:  {}", bare.target_seq);

    let demo = RetrievalResult {
        demo: Demonstration {
            id: "apw:3:Person".into(),
            question: "Who are nominated?".into(),
            context: "Bush picked Rice for the post.".into(),
            answers: vec!["Rice".into()],
            event_type: "Personnel:Nominate".into(),
            role: "Person".into(),
        },
        score: 0.83,
    };
    let with_demo = prompt::build_prompt(&instance, Some(&demo), &PromptOptions::default())?;
    println!("demo:    {}", with_demo.input_seq);
    println!(
        "analogy label at similarity {:.2}: {}",
        demo.score, with_demo.analogy_label
    );

    let answers = split_answers(&with_demo.target_seq, &tokens);
    println!("answers: {answers:?}");
    anyhow::ensure!(answers == ["John M", "Adam"]);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
