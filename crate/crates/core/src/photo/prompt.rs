const DETECTION_PROMPT: &str = "\
You are given a street-level photo taken at a known GPS position and compass heading. \
Identify the major geographic features visible in it by following these steps.

Step 1: Category guidance. Identify key features within four major categories: \
transportation infrastructure, natural features, built environment, and additional landmarks. \
Ignore minor objects such as lampposts, benches, traffic lights, bollards, signage, flowers, \
people and vehicles.

Step 2: Structured description. Summarize each detected feature on its own line in the format:
[feature name] -- [angle span] -- [description] -- [distance]
The angle span is the horizontal extent of the feature relative to the center of the image, \
written like [left 70° to left 30°], [left 10° to right 10°] or [right 30° to right 70°]. \
The distance is the estimated distance from the camera, written like [~20 m] or [~5–20 m].

Step 3: Left-to-right ordering. Sort all detected features according to their left-to-right \
position in the image.

Step 4: Category alignment. Retain only features aligned with the core OpenStreetMap keys: \
{building, road, park, natural, waterway}.

Reply with the feature lines only, one per line, and nothing else.
";

/// The structured four-step detection prompt.
pub fn detection_prompt() -> &'static str {
    DETECTION_PROMPT
}
