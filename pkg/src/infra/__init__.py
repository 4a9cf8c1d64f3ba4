# Infrastructure package