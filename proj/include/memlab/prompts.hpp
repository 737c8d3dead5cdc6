#pragma once

// Prompt templates. Every prompt opens with a "[[task: <name>]]" line so
// scripted providers (and humans reading transcripts) can tell calls apart.

#include "memlab/domain.hpp"

#include <string>
#include <vector>

namespace memlab::prompts {

inline std::string task_tag(std::string_view name) { return "[[task: " + std::string(name) + "]]\n"; }

inline std::string section(std::string_view title, std::string_view body) {
    return "### " + std::string(title) + "\n" + std::string(body) + "\n\n";
}

// ---- rendering helpers ------------------------------------------------------

inline std::string render_seed(const Seed& s) {
    std::string out = "Domain: " + s.domain + "\nTitle: " + s.title + "\nTheme: " + s.theme + "\nSubtopics:\n";
    for (const auto& t : s.subtopics) out += "- " + t + "\n";
    out += "Timeline: " + s.timeline.start.iso() + " to " + s.timeline.end.iso();
    return out;
}

inline std::string render_profile(const UserProfile& p) {
    std::string out = "Name: " + p.name + "\nAge: " + std::to_string(p.age) + "\nGender: " + p.gender +
                      "\nLocation: " + p.location + "\nProfession: " + p.profession;
    if (!p.personality.empty()) out += "\nPersonality: " + p.personality;
    return out;
}

inline std::string render_relationships(const RelationshipGraph& g) {
    std::string out;
    for (const auto& p : g.persons) {
        out += "- " + p.name + " (" + std::string(to_string(p.relation)) + ", age " + std::to_string(p.age) + ")\n";
    }
    return out.empty() ? "(none)" : out;
}

inline std::string render_bullet(const BulletPoint& b) {
    std::string out = "- ";
    if (b.kind != BulletKind::Normal) out += "[" + std::string(to_string(b.kind)) + "] ";
    if (!b.narrative_label.empty()) out += b.narrative_label + ": ";
    return out + b.description;
}

inline std::string render_sub_plan(const SubPlan& s, std::size_t index) {
    std::string out = "Sub-plan " + std::to_string(index + 1) + " (" + s.time_anchor + ")\n";
    for (const auto& b : s.bullets) out += render_bullet(b) + "\n";
    return out;
}

inline std::string render_plan(const Plan& p) {
    std::string out;
    for (std::size_t i = 0; i < p.sub_plans.size(); ++i) out += render_sub_plan(p.sub_plans[i], i);
    if (!p.summary.empty()) out += "Summary: " + p.summary + "\n";
    return out;
}

inline std::string render_turns(const std::vector<Turn>& turns) {
    std::string out;
    for (const auto& t : turns) {
        out += (t.role == Role::User ? "User: " : "Assistant: ") + t.content + "\n";
    }
    return out.empty() ? "(none)" : out;
}

inline std::string render_pair(const ExchangePair& p) { return p.segment(); }

// ---- episodic memory and scratchpad ----------------------------------------

inline std::string kv_extraction(const ExchangePair& pair) {
    return task_tag("kv_extraction") +
           "Read the exchange below and index it for later lookup. List every entity mentioned "
           "(people, places, dates, amounts, objects, preferences, decisions) as one line of the form\n"
           "key: value\n"
           "where the key names the entity and the value states its attribute or detail. Then add one line\n"
           "SUMMARY: <one-sentence summary of the exchange>\n"
           "Output nothing else.\n\n" +
           section("Exchange", render_pair(pair));
}

inline std::string scratchpad_notes(const ExchangePair& current, const ExchangePair* previous) {
    std::string out = task_tag("scratchpad_notes") +
                      "You maintain a scratchpad of salient information about the user. Reason over the "
                      "current exchange (and the preceding one, if shown) and extract facts, life events, "
                      "future intentions, preferences, instructions, and time or place context worth "
                      "remembering. Reply with\nNOTES: <notes>\nor\nNOTES: (none)\nif nothing is salient.\n\n";
    if (previous) out += section("Previous exchange", render_pair(*previous));
    out += section("Current exchange", render_pair(current));
    return out;
}

inline std::string scratchpad_summary(std::string_view notes, std::size_t target_tokens) {
    return task_tag("scratchpad_summary") +
           "Compress the scratchpad below into at most " + std::to_string(target_tokens) +
           " tokens. Keep every concrete fact, date, number, name, preference and instruction; "
           "merge duplicates; when facts were updated keep the latest value and note the change.\n\n" +
           section("Scratchpad", notes);
}

inline std::string noise_filter(std::string_view chunk, std::string_view question) {
    return task_tag("noise_filter") +
           "Decide whether the note chunk contains information useful for answering the question. "
           "Answer with a single word: yes or no.\n\n" +
           section("Question", question) + section("Chunk", chunk);
}

// ---- benchmark synthesis --------------------------------------------------

inline std::string personality(const std::vector<std::string>& mbti_types, const UserProfile& p) {
    std::string types = join(mbti_types, ", ");
    return task_tag("personality") + "Write one paragraph describing the personality of " + p.name +
           ", a " + std::to_string(p.age) + "-year-old " + p.profession + ", as a coherent blend of the "
           "following MBTI types: " + types + ". Describe traits, not the type codes.\n";
}

inline std::string narratives(const Seed& seed, int min_count, int max_count) {
    return task_tag("narrative_generation") + "Given the conversation seed, produce between " +
           std::to_string(min_count) + " and " + std::to_string(max_count) +
           " narratives capturing the evolving aspects of the storyline (career, goals, relationships, "
           "health, projects...). Output one narrative per line as\nlabel: description\n\n" +
           section("Seed", render_seed(seed));
}

inline std::string plan_format_instructions(int sub_plans, int bullets) {
    return "Return JSON only, shaped as\n"
           "{\"sub_plans\": [{\"time_anchor\": \"YYYY-MM-DD\", \"bullets\": [{\"narrative\": \"...\", "
           "\"description\": \"...\"}]}], \"summary\": \"...\"}\n"
           "with exactly " + std::to_string(sub_plans) + " sub-plans of exactly " + std::to_string(bullets) +
           " bullets each. Time anchors must be non-decreasing and inside the timeline.\n\n";
}

inline std::string category_guidance(Category c) {
    switch (c) {
        case Category::Coding:
            return "The user is a programmer: bullets should involve concrete code, bugs, reviews and tooling.\n";
        case Category::Math:
            return "The user studies or works with mathematics: bullets should involve concrete problems, "
                   "derivations and worked solutions.\n";
        case Category::General: break;
    }
    return "";
}

inline std::string plan_single(const Seed& seed, const UserProfile& profile, const RelationshipGraph& rel,
                               const std::vector<std::string>& narrative_set, int sub_plans, int bullets,
                               Category category) {
    return task_tag("plan_generation") +
           "Write a chronological conversation plan for a user who talks with an AI assistant over the "
           "timeline. Each sub-plan is one stage of the story with a time anchor; each bullet ties one "
           "narrative to a concrete development.\n" +
           category_guidance(category) + plan_format_instructions(sub_plans, bullets) +
           section("Seed", render_seed(seed)) + section("User profile", render_profile(profile)) +
           section("Relationships", render_relationships(rel)) +
           section("Narratives", join(narrative_set, "\n"));
}

inline std::string seeds_10m(const Seed& main, const UserProfile& profile, bool hierarchical, int count) {
    std::string how = hierarchical
                          ? "Decompose the main seed into " + std::to_string(count) +
                                " sub-seeds, each a distinct topical and temporal slice; together they span "
                                "the whole storyline."
                          : "Keep the main seed as the first stage and continue the user's life with " +
                                std::to_string(count - 1) + " chronologically successive seeds.";
    return task_tag(hierarchical ? "seed_decomposition" : "seed_expansion") + how +
           " Slices must not overlap and must cover the main timeline: the first starts on its start date, "
           "each next one starts the day after the previous ends, the last ends on its end date.\n"
           "Return a JSON array of objects {\"domain\", \"title\", \"theme\", \"subtopics\": [...], "
           "\"start\": \"YYYY-MM-DD\", \"end\": \"YYYY-MM-DD\"}.\n\n" +
           section("Main seed", render_seed(main)) + section("User profile", render_profile(profile));
}

struct PlanContext10m {
    const Seed* main_seed = nullptr;
    const std::vector<Seed>* all_seeds = nullptr;
    int index = 0;
    bool first = false;
    const Plan* previous_plan = nullptr;
    std::vector<std::string> previous_summaries;
    bool hierarchical = false;
};

inline std::string plan_10m(const PlanContext10m& ctx, const UserProfile& profile, const RelationshipGraph& rel,
                            const std::vector<std::string>& narrative_set, int sub_plans, int bullets,
                            Category category) {
    const auto& seeds = *ctx.all_seeds;
    const auto& current = seeds.at(static_cast<std::size_t>(ctx.index));
    std::string out = task_tag(ctx.hierarchical ? "plan_generation_hierarchical" : "plan_generation_sequential");
    out += "Write conversation plan " + std::to_string(ctx.index + 1) + " of " + std::to_string(seeds.size()) +
           " in a series of interlocking plans. Core relationships stay fixed; new acquaintances may appear.\n";
    out += "Introduction flag: " + std::string(ctx.first ? "1 (introduce the user in the first sub-plan)" : "0") + "\n";
    out += category_guidance(category) + plan_format_instructions(sub_plans, bullets);
    if (ctx.hierarchical && ctx.main_seed) out += section("Main seed", render_seed(*ctx.main_seed));
    out += section("Current seed", render_seed(current));
    if (ctx.hierarchical) {
        if (ctx.index > 0) out += section("Preceding seed", render_seed(seeds[static_cast<std::size_t>(ctx.index - 1)]));
        if (ctx.index + 1 < static_cast<int>(seeds.size())) {
            out += section("Following seed", render_seed(seeds[static_cast<std::size_t>(ctx.index + 1)]));
        }
    }
    out += section("User profile", render_profile(profile));
    out += section("Relationships", render_relationships(rel));
    out += section("Narratives", join(narrative_set, "\n"));
    if (ctx.previous_plan) out += section("Previous plan", render_plan(*ctx.previous_plan));
    if (ctx.hierarchical && !ctx.previous_summaries.empty()) {
        std::string sums;
        for (std::size_t i = 0; i < ctx.previous_summaries.size(); ++i) {
            sums += "Plan " + std::to_string(i + 1) + ": " + ctx.previous_summaries[i] + "\n";
        }
        out += section("Summaries of previous plans", sums);
    }
    return out;
}

inline std::string augment(const Plan& plan) {
    return task_tag("plan_augmentation") +
           "For every sub-plan of the plan below, write exactly three additional bullets:\n"
           "- kind \"contradiction\": the user states something that contradicts an earlier bullet;\n"
           "- kind \"update\": the user revises a fact stated earlier (same narrative label);\n"
           "- kind \"instruction\": the user gives a lasting instruction about how answers should look.\n"
           "Return JSON only: {\"sub_plans\": [{\"bullets\": [{\"kind\": \"...\", \"narrative\": \"...\", "
           "\"description\": \"...\"}]}]} with one entry per sub-plan, in order.\n\n" +
           section("Plan", render_plan(plan));
}

inline std::string questions(Category category, const Seed& seed, const std::vector<BulletPoint>& batch,
                             const std::vector<BulletPoint>& prior_batches, const std::vector<SubPlan>& prior_sub_plans,
                             const std::string& time_anchor, int count) {
    std::string style;
    switch (category) {
        case Category::Coding:
            style = "Mix in questions that share code: buggy snippets needing debugging, working code to "
                    "optimize, and plain descriptions of functionality to implement.\n";
            break;
        case Category::Math:
            style = "Mix in questions that share mathematical work: attempts needing correction, requests for "
                    "the next step of a solution, and new problems to solve.\n";
            break;
        case Category::General: break;
    }
    std::string out = task_tag(category == Category::Coding ? "question_generation_coding"
                               : category == Category::Math ? "question_generation_math"
                                                            : "question_generation_general");
    out += "Write exactly " + std::to_string(count) +
           " messages the user sends to the assistant, grounded in the current bullets and written in the "
           "first person on " + time_anchor + ". Begin each message with a line containing only\nQUESTION:\n" +
           style + "\n";
    out += section("Seed", render_seed(seed));
    std::string earlier;
    for (std::size_t i = 0; i < prior_sub_plans.size(); ++i) earlier += render_sub_plan(prior_sub_plans[i], i);
    if (!earlier.empty()) out += section("Earlier sub-plans", earlier);
    std::string prev, cur;
    for (const auto& b : prior_batches) prev += render_bullet(b) + "\n";
    for (const auto& b : batch) cur += render_bullet(b) + "\n";
    if (!prev.empty()) out += section("Earlier bullets of this sub-plan", prev);
    out += section("Current bullets", cur);
    return out;
}

struct DialogueContext {
    const Seed* seed = nullptr;
    std::string prior_sub_plans;
    std::string current_sub_plan;
    std::string recent_turns;
    std::string older_summary;
    std::string prior_plan_summaries;
};

inline std::string render_dialogue_context(const DialogueContext& c, bool include_current) {
    std::string out = section("Seed", render_seed(*c.seed));
    if (!c.prior_plan_summaries.empty()) out += section("Summaries of earlier plans", c.prior_plan_summaries);
    if (!c.prior_sub_plans.empty()) out += section("Earlier sub-plans", c.prior_sub_plans);
    if (include_current && !c.current_sub_plan.empty()) out += section("Current sub-plan", c.current_sub_plan);
    out += section("Summary of older turns", c.older_summary.empty() ? "(none)" : c.older_summary);
    out += section("Recent turns", c.recent_turns);
    return out;
}

inline std::string assistant_reply(const DialogueContext& c, std::string_view user_message) {
    return task_tag("assistant_reply") +
           "You are a helpful AI assistant in a long-running conversation. Answer the user's latest message "
           "thoroughly, consistent with everything said so far.\n\n" +
           render_dialogue_context(c, false) + section("Latest user message", user_message);
}

inline std::string detect_question(std::string_view assistant_text, const DialogueContext& c) {
    return task_tag("detect_question") +
           "Does the assistant message below ask the user a question that needs a reply from the user? "
           "Answer yes or no.\n\n" +
           section("Recent turns", c.recent_turns) + section("Assistant message", assistant_text);
}

inline std::string detect_followup(std::string_view assistant_text, const DialogueContext& c) {
    return task_tag("detect_followup") +
           "Would a real user naturally ask a clarifying or elaborative follow-up after the assistant message "
           "below, given subject complexity, ambiguity or an incomplete answer? Answer yes or no.\n\n" +
           section("Seed", render_seed(*c.seed)) + section("Recent turns", c.recent_turns) +
           section("Assistant message", assistant_text);
}

inline std::string user_answer(const DialogueContext& c, std::string_view assistant_text) {
    return task_tag("user_answer") +
           "You role-play the user. The assistant asked you something; reply as the user would, consistent "
           "with the storyline and earlier details. Output only the user's message.\n\n" +
           render_dialogue_context(c, true) + section("Assistant message", assistant_text);
}

inline std::string user_followup(const DialogueContext& c, std::string_view assistant_text) {
    return task_tag("user_followup") +
           "You role-play the user. Ask one natural follow-up question about the assistant's last message, "
           "consistent with the storyline. Output only the user's message.\n\n" +
           render_dialogue_context(c, true) + section("Assistant message", assistant_text);
}

inline std::string history_summary(std::string_view previous_summary, std::string_view new_turns) {
    return task_tag("history_summary") +
           "Update the running summary of the conversation with the turns below. Keep facts, dates, "
           "numbers and decisions. Output only the new summary.\n\n" +
           section("Current summary", previous_summary.empty() ? "(none)" : previous_summary) +
           section("New turns", new_turns);
}

// ---- probing questions -------------------------------------------------------

inline std::string_view probe_shape(MemoryAbility a) {
    switch (a) {
        case MemoryAbility::EventOrdering:
            return "{\"question\": \"...\", \"answer\": \"...\", \"ordering_tested\": [\"1st: ...\", ...], "
                   "\"rubric\": [\"LLM response should mention: ...\"]}";
        case MemoryAbility::Abstention:
            return "{\"question\": \"...\", \"ideal_response\": \"Based on the provided chat, there is no "
                   "information related to ...\", \"rubric\": [\"Based on the provided chat, there is no "
                   "information related to ...\"]}";
        default:
            return "{\"question\": \"...\", \"ideal_answer\": \"...\", \"rubric\": [\"LLM response should "
                   "state: ...\"]}";
    }
}

inline std::string_view ability_instructions(MemoryAbility a) {
    switch (a) {
        case MemoryAbility::Abstention:
            return "Ask about something plausible that the conversation never mentions, so the correct answer "
                   "is to say there is no information about it.";
        case MemoryAbility::ContradictionResolution:
            return "Ask a question whose answer depends on two contradictory statements; the ideal answer points "
                   "out the contradiction, mentions both claims and asks which one is correct.";
        case MemoryAbility::EventOrdering:
            return "Ask the user to list the listed developments in the order they came up; give the ordered "
                   "events in ordering_tested.";
        case MemoryAbility::InformationExtraction:
            return "Ask for a specific fact stated in the dialogue.";
        case MemoryAbility::InstructionFollowing:
            return "Ask a question where the user's earlier lasting instruction must shape the answer; rubric "
                   "items describe the expected compliance.";
        case MemoryAbility::KnowledgeUpdate:
            return "Ask for the current value of a fact that was later revised; the answer is the updated value.";
        case MemoryAbility::MultiHopReasoning:
            return "Ask a question that needs facts from several separate parts of the dialogue combined.";
        case MemoryAbility::PreferenceFollowing:
            return "Ask for advice where the user's stated preference must shape the answer; rubric items "
                   "describe the expected compliance.";
        case MemoryAbility::Summarization:
            return "Ask for a comprehensive summary of how the covered topics developed; rubric items are the "
                   "atomic content units of the ideal summary.";
        case MemoryAbility::TemporalReasoning:
            return "Ask a question that requires computing a duration or ordering between dated events.";
    }
    return "";
}

inline std::string probe_generation(MemoryAbility ability, const std::vector<BulletPoint>& bullets,
                                    std::string_view snippets) {
    std::string cur;
    for (const auto& b : bullets) cur += render_bullet(b) + "\n";
    return task_tag("probe_" + std::string(to_string(ability))) + std::string(ability_instructions(ability)) +
           "\nEach rubric item must be one atomic, self-contained criterion. Return JSON only, shaped as\n" +
           std::string(probe_shape(ability)) + "\n\n" + section("Selected plan bullets", cur) +
           section("Dialogue snippets", snippets);
}

inline std::string abstention_probe(const std::vector<Plan>& plans, const std::vector<std::string>& avoid = {}) {
    std::string all;
    for (const auto& p : plans) all += render_plan(p);
    std::string out = task_tag("probe_abstention") + std::string(ability_instructions(MemoryAbility::Abstention)) +
                      "\nReturn JSON only, shaped as\n" + std::string(probe_shape(MemoryAbility::Abstention)) +
                      "\n\n" + section("Conversation plan", all);
    if (!avoid.empty()) out += section("Already asked (pick a different topic)", join(avoid, "\n"));
    return out;
}

// ---- evaluation ----------------------------------------------------------------

inline std::string judge(std::string_view question, std::string_view response, std::string_view nugget) {
    return task_tag("nugget_judge") +
           "Score whether the response satisfies the criterion. Reply with exactly one number: 0 (not "
           "satisfied), 0.5 (partially satisfied) or 1 (fully satisfied).\n\n" +
           section("Question", question) + "<response>\n" + std::string(response) + "\n</response>\n\n" +
           "<criterion>\n" + std::string(nugget) + "\n</criterion>\n";
}

inline std::string equivalence(std::string_view reference_event, std::string_view response_snippet) {
    return task_tag("event_equivalence") +
           "Do the two snippets denote the same event or topic? Answer yes or no.\n\n" +
           "<reference>\n" + std::string(reference_event) + "\n</reference>\n\n<candidate>\n" +
           std::string(response_snippet) + "\n</candidate>\n";
}

}  // namespace memlab::prompts
