//! Prompt templates for action selection and methodology induction.
//!
//! The rendered text is part of the external contract: the action-selection
//! prompt carries the `Question:` / `Methodology:` / `Previous Actions:` /
//! `Available Actions:` slots and the `Action:` / `Reason:` output format;
//! the induction prompt demands `Overall Instruction:` and
//! `Step-by-step Guide:` sections. Tests assert these markers literally.

use std::fmt::Write;

/// Marker shown in the `Methodology:` slot when guidance is ablated or not
/// yet induced.
pub const NO_METHODOLOGY: &str = "(none)";

const TOOL_DEFINITIONS: &str = "\
Time-based Queries:
Retrieve the time of a specific event based on the head/subject entity, relation and tail/object entity by using the $getTime(HEAD,RELATION,TAIL)$ function.
Identify entities/events that occurred before a given time by using the $getBefore({entities},SPECIFIED_TIME)$ function.
Identify entities/events that occurred after a given time by using the $getAfter({entities},SPECIFIED_TIME)$ function.
Identify entities/events that occurred between two specific times by using the $getBetween({entities},START_TIME,END_TIME)$ function.

Entity Queries:
Identify the tail/object entity based on the head/subject entity and relation by using the $getTailEntity(CURRENT_HEAD,RELATION,OPTIONAL_TIME_CONSTRAINT)$ function.
Identify the head/subject entity based on the tail/object entity and relation by using the $getHeadEntity(CURRENT_TAIL,RELATION,OPTIONAL_TIME_CONSTRAINT)$ function.

Specific Time Queries:
Pinpoint entities with the earliest occurrence by using the $getFirst({entities})$ function.
Identify entities with the latest occurrence by using the $getLast({entities})$ function.
To provide your answer, use the $answer(YOUR_ANSWER)$ function.";

// Two fixed exemplar walks for the few-shot slot: one time question, one
// before/last question.
const FEW_SHOT_EXAMPLES: &str = "\
Example 1:
Question: In which month did the governor first commend the minister?
Action 0: $getTime(Governor,Commend,Minister)$
Response 0: entities = [('Governor', '2014-10-07')]
Action 1: $getFirst({entities})$
Response 1: entities = [('Governor', '2014-10-07')]
Action 2: $answer(2014-10)$

Example 2:
Question: Who was the last to criticize the republic before the senator did?
Action 0: $getTime(Senator,Criticize,Republic)$
Response 0: entities = [('Senator', '2006-01-17')]
Action 1: $getHeadEntity(Republic,Criticize,no time)$
Response 1: entities = [('Activist', '2005-01-05'), ('Chancellor', '2006-01-16')]
Action 2: $getBefore({entities},2006-01-17)$
Response 2: entities = [('Activist', '2005-01-05'), ('Chancellor', '2006-01-16')]
Action 3: $getLast({entities})$
Response 3: entities = [('Chancellor', '2006-01-16')]
Action 4: $answer(Chancellor)$";

/// A previously committed step, rendered into the `Previous Actions:` slot.
#[derive(Debug, Clone)]
pub struct HistoryLine {
    pub action: String,
    pub result: String,
}

/// Render the action-selection prompt.
///
/// `available` supplies one canonical action text per line under
/// `Available Actions:`; it must be non-empty.
pub fn action_selection_prompt(
    question: &str,
    methodology: Option<&str>,
    history: &[HistoryLine],
    available: &[String],
    feedback: Option<&str>,
) -> String {
    debug_assert!(!available.is_empty(), "prompt requires candidates");
    let mut prompt = String::with_capacity(4096);
    prompt.push_str(
        "Please use the tools provided below to interact with the temporal knowledge graph. \
         You will find a list of actions categorized into time-based queries, entity queries, \
         and specific time queries. There may be more than one answer to the question, but you \
         only need to answer one correct answer that satisfies the question.\n\n\
         To solve this question, you need to first identify the entities and relationships in \
         the question, selecting the appropriate actions to retrieve the required information, \
         and finally, providing the correct answer.\n\n",
    );
    prompt.push_str(TOOL_DEFINITIONS);
    prompt.push_str(
        "\n\nNote: Always enclose the selected action in $ and provide a reason for your \
         choice if necessary.\n\n",
    );
    let _ = writeln!(prompt, "Examples for your reference:\n{FEW_SHOT_EXAMPLES}");
    prompt.push_str("(end of examples)\n\nCurrent Challenge:\n\n");
    let _ = writeln!(prompt, "Question: {question}\n");
    let _ = writeln!(
        prompt,
        "Methodology: {}",
        methodology.unwrap_or(NO_METHODOLOGY)
    );
    prompt.push_str("(end of methodology)\n\n");
    prompt.push_str("Previous Actions:");
    if history.is_empty() {
        prompt.push_str(" (none)\n");
    } else {
        prompt.push('\n');
        for (index, line) in history.iter().enumerate() {
            let _ = writeln!(prompt, "Action {index}: {}", line.action);
            let _ = writeln!(prompt, "Response {index}: {}", line.result);
        }
    }
    prompt.push_str("(end of previous actions)\n\n");
    if let Some(feedback) = feedback {
        let _ = writeln!(prompt, "Feedback from your previous response: {feedback}\n");
    }
    prompt.push_str("Available Actions:\n");
    for action in available {
        let _ = writeln!(prompt, "{action}");
    }
    prompt.push_str(
        "\nChoose your next action from the available actions above, ensuring its \
         completeness. If you have found the answer, remember to use the answer function.\n\n\
         Organize your output by strictly following the format below:\n\n\
         Action:\n\
         <Choose your next action from the available actions above. Note: Always enclose the \
         selected action in $. Replace any time slot with a specified time in the format YYYY \
         or YYYY-MM or YYYY-MM-DD>\n\n\
         Reason:\n\
         <Explain the reason for choosing this action.>\n",
    );
    prompt
}

/// Render the methodology-induction prompt from per-episode transcripts.
pub fn methodology_prompt(correct_samples: &[String], incorrect_samples: &[String]) -> String {
    let mut prompt = String::with_capacity(4096);
    prompt.push_str(
        "Carefully analyze the following correct and incorrect examples. From these, extract \
         and summarize the corresponding patterns and principles. Based on these examples, \
         provide a comprehensive methodology that describes how to correctly tackle this type \
         of problem, highlighting the key steps and common pitfalls to avoid.\n\n",
    );
    prompt.push_str(
        "Task Definition: answer a temporal question by iteratively selecting actions \
         (getTime, getTailEntity, getHeadEntity, getBefore, getAfter, getBetween, getFirst, \
         getLast, answer) that query a temporal knowledge graph, then provide the final \
         answer with the answer function.\n(end of task definition)\n\n",
    );
    prompt.push_str(
        "Here is an example output:\n\
         Overall Instruction:\n\
         This type of problem involves the sequential determination of events. To find the \
         answer, first pin down the temporal anchor with getTime, then collect the entities \
         connected by the relation in question, and finally filter them against the anchor \
         before answering.\n\n\
         Step-by-step Guide:\n\
         1. Use getTime to find the anchor time of the reference event.\n\
         2. Use getHeadEntity or getTailEntity to collect candidate entities.\n\
         3. Use getBefore, getAfter, or getBetween to keep candidates satisfying the time \
         constraint.\n\
         4. Use getFirst or getLast if the question asks for an extreme, then answer.\n\
         (end of example output)\n\n",
    );
    prompt.push_str(
        "Here is the correct samples and incorrect samples for the current question type:\n",
    );
    prompt.push_str("Correct samples:\n");
    render_samples(&mut prompt, correct_samples);
    prompt.push_str("\nIncorrect samples:\n");
    render_samples(&mut prompt, incorrect_samples);
    prompt.push_str("(end of samples)\n\n");
    prompt.push_str(
        "Now start writing. Please design a methodology that describes how to correctly \
         tackle this type of problem. The goal is to provide a comprehensive guide that \
         highlights the key steps and common pitfalls to avoid when approaching this type of \
         problem. Organize your output by strictly following the output format below:\n\n\
         Overall Instruction:\n\
         <Define this methodology in detail. Provide a concise guide or inference. Note that \
         the guidance you provide should be at a methodological level, for this type of \
         question, not for a specific one.>\n\n\
         Step-by-step Guide:\n\
         <A step-by-step guide or procedure detailing how to approach and solve this kind of \
         question. Note that the steps proposed should be specific and relevant to this type \
         of question; tell which type of action should be used in each step and the reason.>\n",
    );
    prompt
}

fn render_samples(prompt: &mut String, samples: &[String]) {
    if samples.is_empty() {
        prompt.push_str("(none)\n");
        return;
    }
    for sample in samples {
        prompt.push_str(sample);
        if !sample.ends_with('\n') {
            prompt.push('\n');
        }
    }
}
