from btlbounds.core.config import settings
from btlbounds.core.logging import logger
