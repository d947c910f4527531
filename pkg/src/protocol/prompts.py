"""System prompts and message builders for expansion episodes."""

from typing import Any, Dict, List, Sequence

READ_TEXT_SYSTEM_PROMPT = (
    "You are a helpful assistant that answers questions based on rendered text images. "
    "You can view the images and use the read_text tool to read the actual text content "
    "of any image for detailed analysis.\n\n"
    "You have a tool called read_text that reads the text content of any image. To use it:\n\n"
    "<tool_call>{\"name\": \"read_text\", \"arguments\": {\"image\": IMAGE_NUMBER}}</tool_call>\n\n"
    "You can call read_text multiple times on different images. Always reason inside <think> "
    "and </think> tags before taking any action. If you need more detail from a specific image, "
    "call read_text to get its text content. Do not read the entire input --- only read images "
    "that are likely relevant. Once you have enough information, provide your final answer."
)

ZOOM_IN_SYSTEM_PROMPT = (
    "You are a helpful assistant that answers questions about multi-image documents. "
    "You can view low-resolution thumbnail images and use the zoom_in tool to get the original "
    "full-resolution image for detailed analysis.\n\n"
    "You have a tool called zoom_in that shows the original image at full resolution. "
    "Images are numbered starting from 1. To use it:\n\n"
    "<tool_call>{\"name\": \"zoom_in\", \"arguments\": {\"image\": IMAGE_NUMBER}}</tool_call>\n\n"
    "You can call zoom_in multiple times on different images. Always reason inside <think> "
    "and </think> tags before taking any action. First examine the thumbnail images to identify "
    "which ones likely contain relevant information, then call zoom_in to get the original "
    "full-resolution version. Once you have enough information, provide your final answer."
)

# Prompts below drive untrained endpoints; they are not part of the trained tool format.
DIRECT_ANSWER_SYSTEM_PROMPT = (
    "You are a helpful assistant that answers questions based on rendered text images. "
    "Read the images and answer the question directly and concisely."
)

SELECTION_SYSTEM_PROMPT = (
    "You are a helpful assistant that locates information in multi-image documents. "
    "Images are numbered starting from 1. Identify the single image most likely to contain "
    "the answer to the question. Reply with only the image number."
)

ANSWER_WITH_EVIDENCE_SYSTEM_PROMPT = (
    "You are a helpful assistant that answers questions based on rendered text images. "
    "You are given the images and the full content of one selected image. "
    "Answer the question directly and concisely."
)

TOOL_NAME_BY_KIND = {
    "source_text": "read_text",
    "ocr_text": "read_text",
    "image_zoom": "zoom_in",
}


def system_prompt_for(expand_kind: str) -> str:
    """System prompt matching an expansion kind."""
    if expand_kind == "image_zoom":
        return ZOOM_IN_SYSTEM_PROMPT
    if expand_kind in TOOL_NAME_BY_KIND:
        return READ_TEXT_SYSTEM_PROMPT
    raise ValueError(f"Unknown expand kind: {expand_kind}")


def user_turn_text(page_count: int, question: str) -> str:
    """Text form of the opening user turn: one ``<image>`` placeholder per page, then the question."""
    return "<image>" * page_count + "\n" + question


def user_message(images: Sequence[Any], question: str) -> Dict[str, Any]:
    parts: List[Dict[str, Any]] = [{"type": "image", "image": image} for image in images]
    parts.append({"type": "text", "text": question})
    return {"role": "user", "content": parts}


def selection_question(question: str) -> str:
    return f"{question}\n\nWhich image number most likely contains the answer? Reply with only the number."


def malformed_call_message(error_message: str, tool_name: str = "read_text") -> str:
    return (
        f"Error: could not parse tool call ({error_message}). Use "
        f"<tool_call>{{\"name\": \"{tool_name}\", \"arguments\": {{\"image\": IMAGE_NUMBER}}}}</tool_call> "
        "with an integer image number, or give your final answer."
    )
