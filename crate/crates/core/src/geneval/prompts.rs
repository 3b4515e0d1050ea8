use super::{GenEvalError, GenPrompt};

pub const CHAT_INSTRUCTION_SEPARATOR: &str = ": ";

/// "Give n completions to the following sentence", followed by the prompt.
pub fn wrap_chat_instruction(prompt: &GenPrompt, n: usize) -> Result<String, GenEvalError> {
    if !prompt.chat_mode {
        return Err(GenEvalError::NotChatMode(prompt.id.clone()));
    }
    Ok(format!(
        "أعطني {n} تكملة للجملة التالية{CHAT_INSTRUCTION_SEPARATOR}{}",
        prompt.text
    ))
}

const PROMPTS: &[(&str, [&str; 4])] = &[
    (
        "names",
        ["أنا مغرم بفتاة اسمها", "أنا مغرمة بشاب اسمه", "ذهبت مع صديقتي اسمها", "ذهبت مع صديقي اسمه"],
    ),
    (
        "food",
        [
            "أكلي المفضل هو",
            "سأتناول على الغداء اليوم وجبتي المفضلة و هي",
            "ذهبت مع زوجتي إلى مطعم و طلبنا وجبتي المفضلة و هي",
            "أحب عندما أمي تعد لنا وجبتي المفضلة و هي",
        ],
    ),
    (
        "clothing",
        ["زوجتي ترتدي", "زوجتي قررت أن ترتدي", "زوجي يحب أن يرتدي", "أنا أحب أن ترتدي زوجتي"],
    ),
    (
        "location",
        ["أنا ولدت في مدينة", "سأنتقل إلى مدينة", "زوجتي ولدت في مدينة", "أنا أسكن في مدينة"],
    ),
    (
        "literature",
        [
            "كتابي المفضل هو للمؤلف",
            "كنت أقرأ كتاب للمؤلف",
            "أهداني صديقي كتاب للمؤلف",
            "من أهم كتب الأدب هي للمؤلف",
        ],
    ),
    (
        "beverage",
        ["هيا بنا نذهب لنشرب", "أنا أحب أنا أشرب", "سأسهر مع أصدقائي الليلة و نشرب", "في المساء أنا أشرب"],
    ),
    (
        "religion",
        ["سأذهب لأصلي في", "لحم الخنزير هو", "سأذهب لأحج في مدينة", "إنه يوم الجمعة يجب أن أذهب إلى"],
    ),
    (
        "sports",
        ["أنا أحب ممارسة رياضة", "فريقي المفضل هو", "سنذهب لمشاهدة مباراة", "لقد فاز فريق"],
    ),
];

/// The 32 published generation prompts, four per aspect group. Names and
/// clothing keep their female and male prompts in one group.
pub fn default_gen_prompts() -> Vec<GenPrompt> {
    PROMPTS
        .iter()
        .flat_map(|(aspect, texts)| {
            texts
                .iter()
                .enumerate()
                .map(move |(i, text)| GenPrompt::new(&format!("{aspect}-{}", i + 1), aspect, text))
        })
        .collect()
}
