from pydantic import BaseModel, ConfigDict


class BaseSchema(BaseModel):
    model_config = ConfigDict(
        validate_assignment=True,
        validate_default=True,
        use_enum_values=False,
        extra='forbid'  # une clé de configuration inconnue est une erreur
    )
